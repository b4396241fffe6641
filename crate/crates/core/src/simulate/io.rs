//! Scenario file and CSV summary.
//!
//! Binary layout, all integers `u64` and floats `f64`, little-endian:
//!
//! ```text
//! magic      8 bytes  "TRSCEN01"
//! n          scenarios
//! k          lines
//! i, j       accident semesters and development lags (equal)
//! seed
//! rate       discount rate per semester (f64)
//! k times:   id length, id bytes (UTF-8)
//! cash       n * k * (i - 1) f64, ordered [scenario][line][period]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::scenarios::{discount_losses, ScenarioSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TRSCEN01";

pub fn write_scenarios(set: &ScenarioSet, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    let header = [set.scenarios(), set.lines(), set.size, set.size];
    for v in header {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&set.seed.to_le_bytes())?;
    w.write_all(&set.discount_rate.to_le_bytes())?;
    for id in &set.line_ids {
        w.write_all(&(id.len() as u64).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    for v in set.cash() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::ScenarioFormat(format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_scenarios(mut r: impl Read) -> Result<ScenarioSet> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::ScenarioFormat("file too short for a scenario header".into()))?;
    if &magic != MAGIC {
        return Err(Error::ScenarioFormat("not a scenario file (bad magic)".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let k = read_u64(&mut r)? as usize;
    let i = read_u64(&mut r)? as usize;
    let j = read_u64(&mut r)? as usize;
    let seed = read_u64(&mut r)?;
    let rate = f64::from_bits(read_u64(&mut r)?);
    if i != j || i < 2 || k == 0 || n == 0 {
        return Err(Error::ScenarioFormat(format!("unsupported shape: n={n}, k={k}, I={i}, J={j}")));
    }
    let mut ids = Vec::with_capacity(k);
    for _ in 0..k {
        let len = read_u64(&mut r)? as usize;
        if len > 4096 {
            return Err(Error::ScenarioFormat(format!("line id of {len} bytes")));
        }
        let mut b = vec![0u8; len];
        r.read_exact(&mut b).map_err(|e| Error::ScenarioFormat(format!("truncated line id: {e}")))?;
        ids.push(String::from_utf8(b).map_err(|_| Error::ScenarioFormat("line id is not UTF-8".into()))?);
    }
    let count = n
        .checked_mul(k)
        .and_then(|v| v.checked_mul(i - 1))
        .ok_or_else(|| Error::ScenarioFormat("cash-flow count overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::ScenarioFormat(format!("expected {} bytes of cash flows, found {}", count * 8, bytes.len())));
    }
    let cash = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    ScenarioSet::new(ids, i, seed, rate, cash)
}

pub fn save_scenarios(set: &ScenarioSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scenarios(set, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    read_scenarios(BufReader::new(File::open(path)?))
}

/// One row per scenario: discounted loss of each line and their aggregate.
pub fn write_summary_csv(set: &ScenarioSet, w: impl Write) -> Result<()> {
    let losses = discount_losses(set, set.discount_rate)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["scenario".to_string()];
    header.extend(set.line_ids.iter().cloned());
    header.push("aggregate".into());
    out.write_record(&header)?;
    for s in 0..losses.scenarios() {
        let mut rec = vec![s.to_string()];
        rec.extend(losses.row(s).iter().map(|v| v.to_string()));
        rec.push(losses.aggregate()[s].to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
