//! Binary checkpoints.
//!
//! Layout: the magic bytes `CYLM`, a little-endian `u32` format version, a
//! little-endian `u64` header length, the header (UTF-8 TOML), then
//! little-endian `f64` arrays of `nz × nr` values each, row-major with the
//! radial index fastest:
//!
//! 1. mode 0 `(u^r, u^θ, u^z)`;
//! 2. for `k = 1..=K` the cos triple `(u^r, u^θ, u^z)` then the sin triple
//!    `(v^r, v^θ, v^z)`;
//! 3. if `history = true`: the pressure (mode 0, then cos and sin for
//!    `k = 1..=K`), followed by the previous forcing in the layout of 1–2
//!    when `prev_forcing = true`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::projection::PressureSet;
use super::stepper::History;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::modes::{ModeCoefficients, VelocityModeSet};

pub const MAGIC: &[u8; 4] = b"CYLM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub nr: usize,
    pub nz: usize,
    pub rmax: f64,
    pub lz: f64,
    #[serde(rename = "N")]
    pub n_base: u32,
    #[serde(rename = "K")]
    pub k_max: usize,
    pub t: f64,
    pub restricted: bool,
    pub dt: f64,
    pub steps: u64,
    pub history: bool,
    pub prev_forcing: bool,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub state: VelocityModeSet,
    pub history: Option<History>,
}

fn coefficient_arrays(c: &ModeCoefficients) -> impl Iterator<Item = &Array2<f64>> {
    c.cos[0].iter().chain(
        (1..c.cos.len()).flat_map(move |k| c.cos[k].iter().chain(c.sin[k].iter())),
    )
}

fn coefficient_arrays_mut(c: &mut ModeCoefficients) -> Vec<&mut Array2<f64>> {
    let (cos0, cos_rest) = c.cos.split_first_mut().expect("mode 0");
    let mut out: Vec<&mut Array2<f64>> = cos0.iter_mut().collect();
    for (cb, sb) in cos_rest.iter_mut().zip(c.sin.iter_mut().skip(1)) {
        out.extend(cb.iter_mut());
        out.extend(sb.iter_mut());
    }
    out
}

fn write_array(w: &mut impl Write, a: &Array2<f64>) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(a.len() * 8);
    for v in a.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_array(r: &mut impl Read, dst: &mut Array2<f64>) -> std::io::Result<()> {
    let mut buf = vec![0u8; dst.len() * 8];
    r.read_exact(&mut buf)?;
    for (v, chunk) in dst.iter_mut().zip(buf.chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    Ok(())
}

pub fn write_checkpoint(
    path: &Path,
    state: &VelocityModeSet,
    history: Option<&History>,
    dt: f64,
) -> Result<()> {
    let g = state.grid();
    let header = CheckpointHeader {
        nr: g.nr(),
        nz: g.nz(),
        rmax: g.rmax(),
        lz: g.lz(),
        n_base: state.n_base(),
        k_max: state.k_max(),
        t: state.time(),
        restricted: state.is_restricted(),
        dt,
        steps: history.map_or(0, |h| h.steps),
        history: history.is_some(),
        prev_forcing: history.is_some_and(|h| h.prev_forcing.is_some()),
    };
    let text = toml::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(text.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(text.as_bytes()).map_err(io)?;
    for a in coefficient_arrays(state.coefficients()) {
        write_array(&mut w, a).map_err(io)?;
    }
    if let Some(h) = history {
        for a in h.pressure.iter() {
            write_array(&mut w, a).map_err(io)?;
        }
        if let Some(f) = &h.prev_forcing {
            for a in coefficient_arrays(f) {
                write_array(&mut w, a).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint (bad magic)", path.display())));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(Error::Checkpoint(format!("implausible header length {len}")));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text).map_err(io)?;
    let text = String::from_utf8(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let header: CheckpointHeader = toml::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let grid = Grid::new(header.nr, header.nz, header.rmax, header.lz)?;
    let mut coeffs = ModeCoefficients::zeros(&grid, header.k_max);
    for a in coefficient_arrays_mut(&mut coeffs) {
        read_array(&mut r, a).map_err(io)?;
    }
    let state = VelocityModeSet::from_coefficients(grid, header.n_base, header.t, header.restricted, coeffs)?;
    let history = if header.history {
        let mut pressure = PressureSet::zeros(&grid, header.k_max);
        for a in pressure.iter_mut() {
            read_array(&mut r, a).map_err(io)?;
        }
        let prev_forcing = if header.prev_forcing {
            let mut f = ModeCoefficients::zeros(&grid, header.k_max);
            for a in coefficient_arrays_mut(&mut f) {
                read_array(&mut r, a).map_err(io)?;
            }
            Some(f)
        } else {
            None
        };
        Some(History {
            steps: header.steps,
            prev_forcing,
            pressure,
        })
    } else {
        None
    };
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(io)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(Checkpoint { header, state, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::new(6, 5, 1.5, 2.0).unwrap();
        let mut s = VelocityModeSet::zeros(g, 3, 2).unwrap();
        s.set_time(0.1 + 0.2);
        s.set_restricted(true);
        let mut x = 0.1f64;
        for a in coefficient_arrays_mut(s.coefficients_mut()) {
            a.mapv_inplace(|_| {
                x = (x * 3.7).fract() + 1e-300;
                x
            });
        }
        let mut h = History::new(&g, 2);
        h.steps = 17;
        h.pressure.sin[1].fill(std::f64::consts::PI);
        h.prev_forcing = Some(s.coefficients().clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.cylm");
        write_checkpoint(&path, &s, Some(&h), 1.0 / 3.0).unwrap();
        let c = read_checkpoint(&path).unwrap();
        assert_eq!(c.state, s);
        assert_eq!(c.history.unwrap(), h);
        assert_eq!(c.header.dt, 1.0 / 3.0);
        assert_eq!(c.state.time().to_bits(), (0.1f64 + 0.2).to_bits());

        write_checkpoint(&path, &s, None, 0.5).unwrap();
        assert!(read_checkpoint(&path).unwrap().history.is_none());
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"CYLM");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
