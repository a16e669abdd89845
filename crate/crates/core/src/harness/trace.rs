use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const FLAG_MCAS_FIRED: u32 = 1;
pub const FLAG_MCAS_ACTUATING: u32 = 2;
pub const FLAG_HS_CLAMPED: u32 = 4;
pub const FLAG_PILOT_EVENT: u32 = 8;
pub const FLAG_RECOVERY_HOLDING: u32 = 16;

/// One simulation step as written to the trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub altitude_ft: f64,
    pub ias_kts: f64,
    pub aoa_true: f64,
    pub aoa_left: f64,
    pub aoa_right: f64,
    /// Synthetic AoA, empty when the estimators disagree or the variant has none.
    pub aoa_sads: Option<f64>,
    pub pitch: f64,
    pub hs_trim: f64,
    pub elevator: f64,
    pub mcas_cmd: f64,
    pub pilot_crank: f64,
    pub verdict_flags: u32,
}

struct HashSink(Sha256);

impl Write for HashSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Streams rows through the CSV encoder into SHA-256, optionally keeping them.
pub struct TraceRecorder {
    writer: csv::Writer<HashSink>,
    rows: Option<Vec<TraceRow>>,
}

impl TraceRecorder {
    pub fn new(keep: bool) -> Self {
        Self {
            writer: csv::Writer::from_writer(HashSink(Sha256::new())),
            rows: keep.then(Vec::new),
        }
    }

    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        self.writer.serialize(row)?;
        if let Some(rows) = &mut self.rows {
            rows.push(row);
        }
        Ok(())
    }

    /// Returns the 64-bit trace hash and the retained rows.
    pub fn finish(self) -> Result<(u64, Option<Vec<TraceRow>>)> {
        let sink = self.writer.into_inner().map_err(|e| e.into_error())?;
        let digest = sink.0.finalize();
        let hash = u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
        Ok((hash, self.rows))
    }
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> TraceRow {
        TraceRow {
            t,
            altitude_ft: 5000.0,
            ias_kts: 220.0,
            aoa_true: 4.0,
            aoa_left: 4.1,
            aoa_right: 3.9,
            aoa_sads: None,
            pitch: 3.0,
            hs_trim: 0.5,
            elevator: 0.0,
            mcas_cmd: 0.0,
            pilot_crank: 0.0,
            verdict_flags: 0,
        }
    }

    #[test]
    fn streamed_hash_equals_hash_of_written_csv() {
        let rows: Vec<_> = (0..50).map(|k| row(k as f64 * 0.1)).collect();
        let mut rec = TraceRecorder::new(true);
        for r in &rows {
            rec.push(*r).unwrap();
        }
        let (h, kept) = rec.finish().unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows).unwrap();
        assert_eq!(h, hash_bytes(&buf));
        assert_eq!(kept.unwrap(), rows);
        let header = String::from_utf8(buf).unwrap();
        assert!(header.starts_with(
            "t,altitude_ft,ias_kts,aoa_true,aoa_left,aoa_right,aoa_sads,pitch,hs_trim,elevator,mcas_cmd,pilot_crank,verdict_flags"
        ));
    }

    #[test]
    fn hash_sees_single_bit_changes() {
        let mut a = TraceRecorder::new(false);
        let mut b = TraceRecorder::new(false);
        a.push(row(0.0)).unwrap();
        let mut r = row(0.0);
        r.hs_trim = f64::from_bits(r.hs_trim.to_bits() + 1);
        b.push(r).unwrap();
        assert_ne!(a.finish().unwrap().0, b.finish().unwrap().0);
    }
}
