//! Direct solvers for the structured systems that appear on the (r, z) grid.
//!
//! Every operator in this crate has coefficients that depend on `r` only and
//! a periodic, constant-coefficient stencil in `z`. A discrete Fourier
//! transform along `z` therefore splits each 2-D system into `nz` independent
//! banded radial systems, one per axial wavenumber.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Forward/inverse DFT along z for `(nz, nr)` arrays.
#[derive(Clone)]
pub struct AxialTransform {
    nr: usize,
    nz: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AxialTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxialTransform")
            .field("nr", &self.nr)
            .field("nz", &self.nz)
            .finish()
    }
}

impl AxialTransform {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        AxialTransform {
            nr: grid.nr(),
            nz: grid.nz(),
            forward: planner.plan_fft_forward(grid.nz()),
            inverse: planner.plan_fft_inverse(grid.nz()),
        }
    }

    /// Returns the spectrum laid out as `[i * nz + κ]` (one contiguous
    /// z-spectrum per radial node).
    pub fn forward(&self, values: &Array2<f64>) -> Vec<Complex64> {
        let (nr, nz) = (self.nr, self.nz);
        let mut buf = vec![Complex64::new(0.0, 0.0); nr * nz];
        for ((j, i), v) in values.indexed_iter() {
            buf[i * nz + j] = Complex64::new(*v, 0.0);
        }
        self.forward.process(&mut buf);
        buf
    }

    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Array2<f64> {
        let (nr, nz) = (self.nr, self.nz);
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / nz as f64;
        Array2::from_shape_fn((nz, nr), |(j, i)| spectrum[i * nz + j].re * scale)
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn nz(&self) -> usize {
        self.nz
    }
}

/// Symbol of `-∂_z²` (compact three-point stencil) at axial index κ.
pub fn axial_second_difference_symbol(grid: &Grid, kappa: usize) -> f64 {
    let theta = 2.0 * PI * kappa as f64 / grid.nz() as f64;
    (2.0 - 2.0 * theta.cos()) / (grid.hz() * grid.hz())
}

/// Symbol of `-(D_z)²` where `D_z` is the centred first difference.
pub fn axial_wide_difference_symbol(grid: &Grid, kappa: usize) -> f64 {
    let theta = 2.0 * PI * kappa as f64 / grid.nz() as f64;
    let s = theta.sin() / grid.hz();
    s * s
}

/// Radial bands of `-(∂_r² + ∂_r / r) + m²/r²` under the grid's ghost rules.
#[derive(Clone, Debug)]
pub struct RadialBands {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl RadialBands {
    pub fn singular_laplacian(grid: &Grid, m: u32) -> Self {
        let n = grid.nr();
        let hr2 = grid.hr() * grid.hr();
        let m2 = (m as f64) * (m as f64);
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            let r = grid.r(i);
            let outer = grid.r_face(i + 1) / (r * hr2);
            let inner = grid.r_face(i) / (r * hr2);
            if i + 1 < n {
                sup[i] = -outer;
                diag[i] += outer;
            } else {
                // ghost f_n = -f_{n-1}
                diag[i] += 2.0 * outer;
            }
            if i > 0 {
                sub[i] = -inner;
                diag[i] += inner;
            }
            diag[i] += m2 / (r * r);
        }
        RadialBands { sub, diag, sup }
    }

    /// Bands of `shift·I + scale·self`.
    pub fn affine(&self, shift: f64, scale: f64) -> Self {
        RadialBands {
            sub: self.sub.iter().map(|v| v * scale).collect(),
            diag: self.diag.iter().map(|v| shift + v * scale).collect(),
            sup: self.sup.iter().map(|v| v * scale).collect(),
        }
    }
}

/// Precomputed Thomas-algorithm factors of a real tridiagonal matrix.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    sub: Vec<f64>,
    sup_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    /// Returns `None` when a zero pivot is met.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut sup_scaled = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let pivot = diag[i] - if i > 0 { sub[i] * prev } else { 0.0 };
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            inv_pivot[i] = 1.0 / pivot;
            sup_scaled[i] = sup[i] * inv_pivot[i];
            prev = sup_scaled[i];
        }
        Some(Tridiagonal {
            sub: sub.to_vec(),
            sup_scaled,
            inv_pivot,
        })
    }

    /// In-place solve on a strided complex vector (`x[offset + k * stride]`).
    pub fn solve_strided(&self, x: &mut [Complex64], offset: usize, stride: usize) {
        let n = self.inv_pivot.len();
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let k = offset + i * stride;
            let v = (x[k] - prev * self.sub[i]) * self.inv_pivot[i];
            x[k] = v;
            prev = v;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let k = offset + i * stride;
            let next = x[offset + (i + 1) * stride];
            x[k] -= next * self.sup_scaled[i];
        }
    }
}

/// LU factorisation with partial pivoting of a real band matrix with `kl`
/// sub- and `ku` super-diagonals.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// `entry(i, j)` is queried for `|i - j|` inside the band only.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entry: impl Fn(usize, usize) -> f64,
    ) -> Option<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            ab: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                *lu.at_mut(i, j) = entry(i, j);
            }
        }
        let upper = ku + kl;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            lu.pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = lu.at(k, j);
                    let b = lu.at(p, j);
                    *lu.at_mut(k, j) = b;
                    *lu.at_mut(p, j) = a;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Some(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.ab[k]
    }

    pub fn solve_strided(&self, x: &mut [Complex64], offset: usize, stride: usize) {
        let n = self.n;
        let at = |k: usize| offset + k * stride;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(at(k), at(p));
            }
            let xk = x[at(k)];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                let l = self.at(i, k);
                if l != 0.0 {
                    x[at(i)] -= xk * l;
                }
            }
        }
        let upper = self.ku + self.kl;
        for k in (0..n).rev() {
            let mut v = x[at(k)];
            for j in k + 1..=(k + upper).min(n - 1) {
                v -= x[at(j)] * self.at(k, j);
            }
            x[at(k)] = v / self.at(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(n: usize, entry: impl Fn(usize, usize) -> f64, x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| entry(i, j) * x[j]).sum())
            .collect()
    }

    #[test]
    fn banded_lu_solves_with_pivoting() {
        let n = 9;
        // zero diagonal forces row exchanges
        let entry = |i: usize, j: usize| -> f64 {
            let d = j as i64 - i as i64;
            match d {
                0 => 0.0,
                -2..=2 => 1.0 + 0.1 * (i as f64) - 0.3 * d as f64,
                _ => 0.0,
            }
        };
        let x: Vec<f64> = (0..n).map(|k| (k as f64 * 0.7).cos()).collect();
        let b = dense_mul(n, entry, &x);
        let lu = BandedLu::factor(n, 2, 2, entry).unwrap();
        let mut rhs: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, -*v)).collect();
        lu.solve_strided(&mut rhs, 0, 1);
        for k in 0..n {
            assert!((rhs[k].re - x[k]).abs() < 1e-12);
            assert!((rhs[k].im + x[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_matches_dense_product() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let entry = |i: usize, j: usize| {
            if i == j {
                diag[i]
            } else if j + 1 == i {
                sub[i]
            } else if i + 1 == j {
                sup[i]
            } else {
                0.0
            }
        };
        let x: Vec<f64> = (0..n).map(|k| k as f64 - 2.5).collect();
        let b = dense_mul(n, entry, &x);
        let t = Tridiagonal::factor(&sub, &diag, &sup).unwrap();
        let mut rhs: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        t.solve_strided(&mut rhs, 0, 1);
        for k in 0..n {
            assert!((rhs[k].re - x[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn axial_transform_roundtrip() {
        let g = Grid::new(5, 12, 1.0, 2.0).unwrap();
        let v = g.sample(|r, z| r * (3.0 * z).sin() + z * z);
        let t = AxialTransform::new(&g);
        let back = t.inverse(t.forward(&v));
        for (a, b) in v.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
