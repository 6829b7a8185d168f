//! Binary snapshots of a [`FieldState`] with a JSON sidecar.
//!
//! Layout (little endian): magic `MKGS`, `u32` version, `u64` n_cells,
//! `f64` h, `f64` t, then `phi`, `phi_t` (interleaved re/im), `a0`, `a0_t`,
//! `ar`, `ar_t`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MkgError, Result};
use crate::field::{FieldState, RadialGrid};

pub const MAGIC: &[u8; 4] = b"MKGS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub n_cells: usize,
    pub h: f64,
    pub r_max: f64,
    pub t: f64,
    pub config_hash: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn write(path: &Path, state: &FieldState, grid: &RadialGrid, config_hash: &str) -> Result<()> {
    state.validate(grid)?;
    let mut buf = Vec::with_capacity(32 + state.len() * 8 * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.n_cells as u64).to_le_bytes());
    buf.extend_from_slice(&grid.h.to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    for arr in [&state.phi, &state.phi_t] {
        for z in arr.iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    for arr in [&state.a0, &state.a0_t, &state.ar, &state.ar_t] {
        for v in arr.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    let side = Sidecar {
        version: VERSION,
        n_cells: grid.n_cells,
        h: grid.h,
        r_max: grid.r_max,
        t: state.t,
        config_hash: config_hash.to_string(),
    };
    let json = serde_json::to_string_pretty(&side).map_err(|e| MkgError::Io(e.to_string()))?;
    fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.pos + N > self.data.len() {
            return Err(MkgError::Io("checkpoint truncated".into()));
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.data[self.pos..self.pos + N]);
        self.pos += N;
        Ok(out)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>()?))
    }
}

/// Reads a checkpoint and its sidecar; the two headers must agree.
pub fn read(path: &Path) -> Result<(FieldState, Sidecar)> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if &c.take::<4>()? != MAGIC {
        return Err(MkgError::Io("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(c.take::<4>()?);
    if version != VERSION {
        return Err(MkgError::Io(format!("unsupported checkpoint version {version}")));
    }
    let n_cells = u64::from_le_bytes(c.take::<8>()?) as usize;
    let h = c.f64()?;
    let t = c.f64()?;
    let n = n_cells + 1;
    let mut cplx = || -> Result<Vec<Complex64>> { (0..n).map(|_| Ok(Complex64::new(c.f64()?, c.f64()?))).collect() };
    let phi = cplx()?;
    let phi_t = cplx()?;
    let mut real = || -> Result<Vec<f64>> { (0..n).map(|_| c.f64()).collect() };
    let a0 = real()?;
    let a0_t = real()?;
    let ar = real()?;
    let ar_t = real()?;
    if c.pos != data.len() {
        return Err(MkgError::Io("trailing bytes in checkpoint".into()));
    }
    let side_text = fs::read_to_string(sidecar_path(path))?;
    let side: Sidecar = serde_json::from_str(&side_text).map_err(|e| MkgError::Io(e.to_string()))?;
    if side.n_cells != n_cells || side.h != h || side.t != t || side.version != version {
        return Err(MkgError::Io("checkpoint sidecar does not match the binary header".into()));
    }
    Ok((
        FieldState {
            t,
            phi,
            phi_t,
            a0,
            a0_t,
            ar,
            ar_t,
        },
        side,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = RadialGrid::new(5.0, 32).unwrap();
        let mut s = FieldState::zeros(&g, 1.25);
        for i in 0..g.len() {
            let r = g.r(i);
            s.phi[i] = Complex64::new(r.sin(), 1.0 / (1.0 + r));
            s.phi_t[i] = Complex64::new(-r, r * r);
            s.a0[i] = (-r).exp();
            s.a0_t[i] = 0.1 * r;
            if i > 0 {
                s.ar[i] = r / 7.0;
                s.ar_t[i] = -r / 3.0;
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("state.bin");
        write(&p, &s, &g, "abc123").unwrap();
        let (back, side) = read(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(side.config_hash, "abc123");
        let len = fs::metadata(&p).unwrap().len() as usize;
        assert_eq!(len, 4 + 4 + 8 + 8 + 8 + g.len() * 8 * 8);
    }
}
