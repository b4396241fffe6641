//! Run-off triangles of loss ratios.
//!
//! Cells are indexed by accident semester `i` and development lag `j`, both
//! 1-based. The observed (upper) set is `i + j <= I + 1`; everything else is
//! the unobserved lower triangle. Observed cells are stored row by row in
//! the order (1,1), (1,2), ..., (1,J), (2,1), ...

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Shape of a square run-off triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangleIndex {
    size: usize,
}

impl TriangleIndex {
    /// A triangle with `I = J = size`.
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Ingestion("triangle must have at least one semester".into()));
        }
        Ok(Self { size })
    }

    /// Number of accident semesters `I`.
    pub fn semesters(&self) -> usize {
        self.size
    }

    /// Number of development lags `J`.
    pub fn lags(&self) -> usize {
        self.size
    }

    /// Observed cells in row `i`: `n_i = J + 1 - i`.
    pub fn row_len(&self, i: usize) -> usize {
        self.size + 1 - i
    }

    pub fn is_upper(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i <= self.size && j <= self.size && i + j <= self.size + 1
    }

    pub fn is_lower(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i <= self.size && j <= self.size && i + j > self.size + 1
    }

    /// `|T_U| = J (J + 1) / 2`.
    pub fn n_upper(&self) -> usize {
        self.size * (self.size + 1) / 2
    }

    /// `|T_L| = J (J - 1) / 2`.
    pub fn n_lower(&self) -> usize {
        self.size * (self.size - 1) / 2
    }

    /// Position of `(i, j)` in the row-major upper-cell order.
    pub fn upper_offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.is_upper(i, j));
        self.row_start(i) + j - 1
    }

    fn row_start(&self, i: usize) -> usize {
        // sum_{r < i} (J + 1 - r)
        (i - 1) * (self.size + 1) - (i - 1) * i / 2
    }

    pub fn upper_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.size).flat_map(move |i| (1..=self.row_len(i)).map(move |j| (i, j)))
    }

    /// Unobserved cells in row-major order.
    pub fn lower_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (2..=self.size).flat_map(move |i| (self.row_len(i) + 1..=self.size).map(move |j| (i, j)))
    }

    /// Calendar period of a lower cell counted from the valuation date, `i + j - (I + 1)`.
    pub fn period(&self, i: usize, j: usize) -> usize {
        i + j - (self.size + 1)
    }
}

/// Accident semester label `YYYY-1` or `YYYY-2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Semester {
    pub year: i32,
    pub half: u8,
}

impl Semester {
    pub fn parse(s: &str) -> Option<Self> {
        let (y, h) = s.trim().split_once('-')?;
        let year = y.parse().ok()?;
        let half = h.parse().ok()?;
        (half == 1 || half == 2).then_some(Semester { year, half })
    }

    fn ordinal(&self) -> i64 {
        2 * self.year as i64 + self.half as i64 - 1
    }

    fn from_ordinal(o: i64) -> Self {
        Semester { year: o.div_euclid(2) as i32, half: (o.rem_euclid(2) + 1) as u8 }
    }

    /// The semester `k` halves later.
    pub fn offset(&self, k: usize) -> Self {
        Self::from_ordinal(self.ordinal() + k as i64)
    }
}

impl fmt::Display for Semester {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.year, self.half)
    }
}

/// One business line's observed loss ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTriangle {
    pub line_id: String,
    pub region: String,
    pub coverage: String,
    /// Label of accident semester `i = 1`.
    pub origin: Semester,
    index: TriangleIndex,
    premiums: Vec<f64>,
    claims: Vec<f64>,
    ratios: Vec<f64>,
}

impl LossTriangle {
    /// Builds a triangle from premiums and incremental claims covering the
    /// upper set. Negative claims are clamped to zero; the number clamped is
    /// returned alongside.
    pub fn from_incremental_claims(
        line_id: impl Into<String>,
        premiums: Vec<f64>,
        claims: &HashMap<(usize, usize), f64>,
    ) -> Result<(Self, usize)> {
        let line_id = line_id.into();
        let index = TriangleIndex::new(premiums.len())?;
        for (i, &p) in premiums.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Ingestion(format!(
                    "line {line_id}: premium for semester {} must be positive, got {p}",
                    i + 1
                )));
            }
        }
        let mut cells = Vec::with_capacity(index.n_upper());
        let mut clamped = 0;
        for (i, j) in index.upper_cells() {
            let c = *claims.get(&(i, j)).ok_or_else(|| {
                Error::Ingestion(format!("line {line_id}: missing cell ({i}, {j})"))
            })?;
            if !c.is_finite() {
                return Err(Error::Ingestion(format!(
                    "line {line_id}: non-finite claim at ({i}, {j})"
                )));
            }
            if c < 0.0 {
                clamped += 1;
                cells.push(0.0);
            } else {
                cells.push(c);
            }
        }
        if let Some(&(i, j)) = claims.keys().find(|&&(i, j)| !index.is_upper(i, j)) {
            return Err(Error::Ingestion(format!(
                "line {line_id}: cell ({i}, {j}) is outside the observed triangle"
            )));
        }
        if clamped > 0 {
            log::warn!("line {line_id}: {clamped} negative incremental claims clamped to zero");
        }
        Ok((Self::assemble(line_id, index, premiums, cells), clamped))
    }

    /// Builds a triangle from loss ratios in upper-cell order.
    pub fn from_ratios(line_id: impl Into<String>, premiums: Vec<f64>, ratios: &[f64]) -> Result<Self> {
        let index = TriangleIndex::new(premiums.len())?;
        if ratios.len() != index.n_upper() {
            return Err(Error::Ingestion(format!(
                "expected {} ratios, got {}",
                index.n_upper(),
                ratios.len()
            )));
        }
        let mut claims = HashMap::with_capacity(ratios.len());
        for ((i, j), &r) in index.upper_cells().zip(ratios) {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Ingestion(format!("ratio at ({i}, {j}) must be finite and >= 0")));
            }
            claims.insert((i, j), r * premiums[i - 1]);
        }
        Ok(Self::from_incremental_claims(line_id, premiums, &claims)?.0)
    }

    fn assemble(line_id: String, index: TriangleIndex, premiums: Vec<f64>, claims: Vec<f64>) -> Self {
        let ratios = index.upper_cells().zip(&claims).map(|((i, _), c)| c / premiums[i - 1]).collect();
        LossTriangle {
            line_id,
            region: String::new(),
            coverage: String::new(),
            origin: Semester { year: 2000, half: 1 },
            index,
            premiums,
            claims,
            ratios,
        }
    }

    pub fn with_metadata(mut self, region: &str, coverage: &str, origin: Semester) -> Self {
        self.region = region.to_string();
        self.coverage = coverage.to_string();
        self.origin = origin;
        self
    }

    pub fn index(&self) -> TriangleIndex {
        self.index
    }

    pub fn premium(&self, i: usize) -> f64 {
        self.premiums[i - 1]
    }

    pub fn premiums(&self) -> &[f64] {
        &self.premiums
    }

    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.ratios[self.index.upper_offset(i, j)]
    }

    pub fn claim(&self, i: usize, j: usize) -> f64 {
        self.claims[self.index.upper_offset(i, j)]
    }

    /// All observed ratios in upper-cell order.
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// Observed ratios of accident semester `i`, lags `1..=n_i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let start = self.index.row_start(i);
        &self.ratios[start..start + self.index.row_len(i)]
    }
}

/// Several business lines observed on the same triangle shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    index: TriangleIndex,
    pub lines: Vec<LossTriangle>,
}

#[derive(Debug, Deserialize)]
struct Record {
    line_id: String,
    region: String,
    coverage: String,
    accident_semester: String,
    development_lag: usize,
    premium: f64,
    incremental_claim: f64,
}

const HEADER: [&str; 7] = [
    "line_id",
    "region",
    "coverage",
    "accident_semester",
    "development_lag",
    "premium",
    "incremental_claim",
];

impl Portfolio {
    pub fn new(lines: Vec<LossTriangle>) -> Result<Self> {
        let first = lines
            .first()
            .ok_or_else(|| Error::Ingestion("portfolio has no lines".into()))?;
        let index = first.index();
        let mut seen = std::collections::HashSet::new();
        for l in &lines {
            if l.index() != index {
                return Err(Error::Ingestion(format!(
                    "line {} has {} semesters, expected {}",
                    l.line_id,
                    l.index().semesters(),
                    index.semesters()
                )));
            }
            if !seen.insert(l.line_id.as_str()) {
                return Err(Error::Ingestion(format!("duplicate line id {}", l.line_id)));
            }
        }
        Ok(Portfolio { index, lines })
    }

    pub fn index(&self) -> TriangleIndex {
        self.index
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn line(&self, id: &str) -> Option<&LossTriangle> {
        self.lines.iter().find(|l| l.line_id == id)
    }

    /// Reads the long CSV format, one row per observed cell. Returns the
    /// portfolio and the number of negative claims clamped to zero.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<(Self, usize)> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<(Self, usize)> {
        if text.trim().is_empty() {
            return Err(Error::Ingestion("no rows".into()));
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Schema { row: 1, message: e.to_string() })?;
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(Error::Schema {
                row: 1,
                message: format!("expected header `{}`", HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.deserialize::<Record>().enumerate() {
            // data rows start on line 2
            let row = k + 2;
            let rec = rec.map_err(|e| Error::Schema { row, message: schema_message(&e) })?;
            let semester = Semester::parse(&rec.accident_semester).ok_or_else(|| Error::Schema {
                row,
                message: format!("bad accident_semester `{}`, expected YYYY-1 or YYYY-2", rec.accident_semester),
            })?;
            if rec.development_lag == 0 {
                return Err(Error::Schema { row, message: "development_lag must be >= 1".into() });
            }
            if !(rec.premium.is_finite() && rec.premium > 0.0) {
                return Err(Error::Schema { row, message: format!("premium must be positive, got {}", rec.premium) });
            }
            if !rec.incremental_claim.is_finite() {
                return Err(Error::Schema { row, message: "incremental_claim must be finite".into() });
            }
            rows.push((row, semester, rec));
        }
        if rows.is_empty() {
            return Err(Error::Ingestion("no rows".into()));
        }
        let origin = rows.iter().map(|r| r.1).min().unwrap();
        let last = rows.iter().map(|r| r.1).max().unwrap();
        let size = (last.ordinal() - origin.ordinal() + 1) as usize;
        let index = TriangleIndex::new(size)?;

        struct Acc {
            region: String,
            coverage: String,
            premiums: BTreeMap<usize, f64>,
            claims: HashMap<(usize, usize), f64>,
        }
        let mut order: Vec<String> = Vec::new();
        let mut acc: HashMap<String, Acc> = HashMap::new();
        for (row, semester, rec) in rows {
            let i = (semester.ordinal() - origin.ordinal() + 1) as usize;
            let j = rec.development_lag;
            if i + j > size + 1 {
                return Err(Error::Schema { row, message: "lower-triangle cell in input".into() });
            }
            let a = acc.entry(rec.line_id.clone()).or_insert_with(|| {
                order.push(rec.line_id.clone());
                Acc {
                    region: rec.region.clone(),
                    coverage: rec.coverage.clone(),
                    premiums: BTreeMap::new(),
                    claims: HashMap::new(),
                }
            });
            if a.region != rec.region || a.coverage != rec.coverage {
                return Err(Error::Schema {
                    row,
                    message: format!("line {} changes region or coverage", rec.line_id),
                });
            }
            match a.premiums.get(&i) {
                Some(&p) if p != rec.premium => {
                    return Err(Error::Schema {
                        row,
                        message: format!(
                            "premium {} differs from {p} given earlier for line {} semester {semester}",
                            rec.premium, rec.line_id
                        ),
                    })
                }
                _ => {
                    a.premiums.insert(i, rec.premium);
                }
            }
            if a.claims.insert((i, j), rec.incremental_claim).is_some() {
                return Err(Error::Schema {
                    row,
                    message: format!("duplicate cell for line {} semester {semester} lag {j}", rec.line_id),
                });
            }
        }
        let mut lines = Vec::with_capacity(order.len());
        let mut clamped = 0;
        for id in order {
            let a = acc.remove(&id).unwrap();
            let premiums = (1..=size)
                .map(|i| {
                    a.premiums.get(&i).copied().ok_or_else(|| {
                        Error::Ingestion(format!("line {id}: missing cell ({i}, 1)"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let (t, c) = LossTriangle::from_incremental_claims(id, premiums, &a.claims)?;
            clamped += c;
            lines.push(t.with_metadata(&a.region, &a.coverage, origin));
        }
        debug_assert!(lines.iter().all(|l| l.index() == index));
        Ok((Portfolio::new(lines)?, clamped))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = HEADER.join(",");
        out.push('\n');
        for l in &self.lines {
            for (i, j) in self.index.upper_cells() {
                out.push_str(&format!(
                    "{},{},{},{},{},{:.16e},{:.16e}\n",
                    l.line_id,
                    l.region,
                    l.coverage,
                    l.origin.offset(i - 1),
                    j,
                    l.premium(i),
                    l.claim(i, j)
                ));
            }
        }
        out
    }
}

fn schema_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full_claims(size: usize, f: impl Fn(usize, usize) -> f64) -> HashMap<(usize, usize), f64> {
        TriangleIndex::new(size).unwrap().upper_cells().map(|(i, j)| ((i, j), f(i, j))).collect()
    }

    #[test]
    fn partition_counts() {
        for size in 1..12 {
            let idx = TriangleIndex::new(size).unwrap();
            assert_eq!(idx.upper_cells().count(), size * (size + 1) / 2);
            assert_eq!(idx.lower_cells().count(), size * (size - 1) / 2);
            for i in 1..=size {
                for j in 1..=size {
                    assert!(idx.is_upper(i, j) ^ idx.is_lower(i, j));
                }
            }
            for (k, (i, j)) in idx.upper_cells().enumerate() {
                assert_eq!(idx.upper_offset(i, j), k);
            }
        }
        let idx = TriangleIndex::new(30).unwrap();
        assert_eq!(idx.n_upper(), 465);
        assert_eq!(idx.n_lower(), 435);
    }

    #[test]
    fn ratio_definition_and_clamping() {
        let mut claims = full_claims(2, |_, _| 10.0);
        claims.insert((1, 1), 25.0);
        claims.insert((2, 1), 0.0);
        claims.insert((1, 2), -5.0);
        let (t, clamped) = LossTriangle::from_incremental_claims("A", vec![100.0, 50.0], &claims).unwrap();
        assert_eq!(t.ratio(1, 1), 0.25);
        assert_eq!(t.ratio(2, 1), 0.0);
        assert_eq!(t.ratio(1, 2), 0.0);
        assert_eq!(clamped, 1);
        assert_eq!(t.row(1), &[0.25, 0.0]);
    }

    #[test]
    fn constructor_errors() {
        let mut claims = full_claims(3, |_, _| 1.0);
        claims.remove(&(2, 2));
        let err = LossTriangle::from_incremental_claims("A", vec![1.0; 3], &claims).unwrap_err();
        assert!(err.to_string().contains("(2, 2)"), "{err}");
        let claims = full_claims(3, |_, _| 1.0);
        assert!(LossTriangle::from_incremental_claims("A", vec![1.0, 0.0, 1.0], &claims).is_err());
    }

    fn sample_portfolio() -> Portfolio {
        let lines = (0..3)
            .map(|k| {
                let claims = full_claims(6, |i, j| (k as f64 + 1.0) * (i as f64).sqrt() / j as f64 * 1.1);
                let prem = (1..=6).map(|i| 100.0 + 7.3 * i as f64).collect();
                LossTriangle::from_incremental_claims(format!("L{k}"), prem, &claims)
                    .unwrap()
                    .0
                    .with_metadata("ON", "PA", Semester { year: 2003, half: 1 })
            })
            .collect();
        Portfolio::new(lines).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = sample_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        p.save_csv(&path).unwrap();
        let (q, clamped) = Portfolio::load_csv(&path).unwrap();
        assert_eq!(clamped, 0);
        assert_eq!(p, q);
        for (a, b) in p.lines.iter().zip(&q.lines) {
            for (x, y) in a.ratios().iter().zip(b.ratios()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn csv_rejects_bad_input() {
        let p = sample_portfolio();
        let good = p.to_csv_string();

        let err = Portfolio::from_csv_str("").unwrap_err();
        assert_eq!(err.to_string(), "ingestion error: no rows");
        let err = Portfolio::from_csv_str(&format!("{}\n", HEADER.join(","))).unwrap_err();
        assert!(err.to_string().contains("no rows"));

        let lower = format!("{good}L0,ON,PA,2005-2,6,1.0,1.0\n");
        match Portfolio::from_csv_str(&lower).unwrap_err() {
            Error::Schema { row, message } => {
                assert_eq!(message, "lower-triangle cell in input");
                assert_eq!(row, 3 * 21 + 2);
            }
            e => panic!("{e}"),
        }

        let mut lines: Vec<&str> = good.lines().collect();
        let dup = lines[1].to_string();
        lines.push(&dup);
        let err = Portfolio::from_csv_str(&lines.join("\n")).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let bad_premium = good.replacen("1.0730000000000000e2", "1.0e2", 1);
        let err = Portfolio::from_csv_str(&bad_premium).unwrap_err();
        assert!(err.to_string().contains("differs"), "{err}");

        let bad_field = good.replacen(",2003-1,1,", ",2003-1,x,", 1);
        match Portfolio::from_csv_str(&bad_field).unwrap_err() {
            Error::Schema { row, .. } => assert_eq!(row, 2),
            e => panic!("{e}"),
        }

        let bad_header = good.replacen("line_id", "line", 1);
        assert!(matches!(Portfolio::from_csv_str(&bad_header), Err(Error::Schema { row: 1, .. })));
    }

    #[test]
    fn semester_labels() {
        let s = Semester::parse("2003-2").unwrap();
        assert_eq!(s.offset(1).to_string(), "2004-1");
        assert_eq!(s.offset(4).to_string(), "2005-2");
        assert!(Semester::parse("2003-3").is_none());
        assert!(Semester::parse("2003").is_none());
    }

    proptest! {
        #[test]
        fn ratio_times_premium_recovers_claim(
            size in 1usize..8,
            seed in proptest::collection::vec(-50.0f64..1e6, 36),
            prem in proptest::collection::vec(1e-3f64..1e7, 8),
        ) {
            let claims = full_claims(size, |i, j| seed[(i * 5 + j) % 36]);
            let premiums = prem[..size].to_vec();
            let (t, _) = LossTriangle::from_incremental_claims("X", premiums, &claims).unwrap();
            for (i, j) in t.index().upper_cells() {
                let c = claims[&(i, j)].max(0.0);
                let back = t.ratio(i, j) * t.premium(i);
                prop_assert!((back - c).abs() <= 1e-12 * c.abs().max(1e-300));
                prop_assert_eq!(t.claim(i, j), c);
            }
        }
    }
}
