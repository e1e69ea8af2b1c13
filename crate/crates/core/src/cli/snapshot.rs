//! `BPLT` snapshot files: magic `BPLT`, format version (u32), grid
//! dimensions `nx`, `ny` (u32 each), time (f64), then `u` and `v` over the
//! physical nodes in row-major order. Everything is little-endian.

use std::io::{Read, Write};

use crate::dynamics::PlateState;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BPLT";
pub const FORMAT_VERSION: u32 = 1;

/// Contents of a snapshot file, detached from any mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: u32,
    pub ny: u32,
    pub time: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    pub fn of(state: &PlateState) -> Self {
        let [nx, ny] = state.mesh().nodes();
        Self {
            nx: nx as u32,
            ny: ny as u32,
            time: state.t,
            u: state.u.physical(),
            v: state.v.physical(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 16 * self.u.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.nx.to_le_bytes());
        out.extend_from_slice(&self.ny.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for x in self.u.iter().chain(&self.v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 {
            return Err(Error::Snapshot(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let (nx, ny) = (u32_at(8), u32_at(12));
        let time = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let n = nx as usize * ny as usize;
        let body = &bytes[24..];
        if body.len() != 16 * n {
            return Err(Error::Snapshot(format!(
                "payload holds {} bytes, {nx}x{ny} grid needs {}",
                body.len(),
                16 * n
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (u, v) = values.split_at(n);
        Ok(Self {
            nx,
            ny,
            time,
            u: u.to_vec(),
            v: v.to_vec(),
        })
    }
}
