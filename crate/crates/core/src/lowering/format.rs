//! Binary and CSV forms of a schedule.
//!
//! Binary layout, little-endian: `"OCDS"`, version `u32`, chunk width `u32`,
//! step count `u64`, accumulator count `u64`, slab count `u64`, output rank
//! `u32` followed by that many `u64` dims, the slab scales as `f64`, then one
//! row of `f64` per step: `M` slow values, `M` fast values, accumulator index,
//! slab index.

use std::io::Write;

use super::schedule::Schedule;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OCDS";
pub const VERSION: u32 = 1;

impl Schedule {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.chunk_width;
        let steps = self.step_count();
        let mut out = Vec::with_capacity(64 + 8 * (self.slab_scales.len() + steps * (2 * m + 2)));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(m as u32).to_le_bytes());
        out.extend_from_slice(&(steps as u64).to_le_bytes());
        out.extend_from_slice(&(self.accumulator_count as u64).to_le_bytes());
        out.extend_from_slice(&(self.slab_scales.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.output_shape.len() as u32).to_le_bytes());
        for &d in &self.output_shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.slab_scales {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in 0..steps {
            let (slow, fast) = self.step(s);
            for v in slow.iter().chain(fast) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(self.acc[s] as f64).to_le_bytes());
            out.extend_from_slice(&(self.slab[s] as f64).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a schedule file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported schedule version {version}")));
        }
        let m = r.u32()? as usize;
        let steps = r.u64()? as usize;
        let accumulator_count = r.u64()? as usize;
        let slabs = r.u64()? as usize;
        let rank = r.u32()? as usize;
        let output_shape = (0..rank).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let slab_scales = (0..slabs).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mut s = Schedule::new(m)?;
        s.accumulator_count = accumulator_count;
        s.output_shape = output_shape;
        s.slab_scales = slab_scales;
        for _ in 0..steps {
            for _ in 0..m {
                s.slow.push(r.f64()?);
            }
            for _ in 0..m {
                s.fast.push(r.f64()?);
            }
            let acc = r.f64()?;
            let slab = r.f64()?;
            if acc < 0.0 || acc as usize >= accumulator_count || slab < 0.0 || slab as usize >= slabs {
                return Err(Error::Format("step index out of range".into()));
            }
            s.acc.push(acc as u64);
            s.slab.push(slab as u64);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(s)
    }

    /// One row per step: `step,acc,slab,scale,slow_0..,fast_0..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.chunk_width;
        let mut header = String::from("step,acc,slab,scale");
        for i in 0..m {
            header.push_str(&format!(",slow_{i}"));
        }
        for i in 0..m {
            header.push_str(&format!(",fast_{i}"));
        }
        writeln!(w, "{header}")?;
        for s in 0..self.step_count() {
            let (slow, fast) = self.step(s);
            let mut line = format!("{s},{},{},{}", self.acc[s], self.slab[s], self.slab_scales[self.slab[s] as usize]);
            for v in slow.iter().chain(fast) {
                line.push_str(&format!(",{v}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of schedule file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
