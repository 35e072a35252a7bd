//! Periodic spectral grid on the torus [0, L)^d, fields sampled on it, and
//! the FFT based operations shared by the field-level modules.
//!
//! Sites are stored row-major (last axis fastest). Wavenumbers follow the
//! standard FFT ordering: index j maps to 2πj/L for j < M/2 and to
//! 2π(j−M)/L for j ≥ M/2.

use std::cell::RefCell;
use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    pub m: usize,
    pub l: f64,
}

impl Grid {
    /// Spectral grid with `m` points per axis; `m` must be a power of two ≥ 8.
    pub fn new(d: usize, m: usize, l: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::config(format!("grid dimension {d} not in 1..=3")));
        }
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::config(format!("grid points per axis {m} must be a power of two >= 8")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::config(format!("box side {l} must be positive")));
        }
        Ok(Grid { d, m, l })
    }

    /// One-dimensional lattice with an arbitrary number of sites ≥ 2, used
    /// for the few-mode Fock oracle.
    pub fn small_lattice(m: usize, l: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::config("lattice needs at least two sites"));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::config(format!("box side {l} must be positive")));
        }
        Ok(Grid { d: 1, m, l })
    }

    pub fn h(&self) -> f64 {
        self.l / self.m as f64
    }

    pub fn n_sites(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    /// Cell volume h^d.
    pub fn cell(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    /// Wavenumber of FFT index `j` along one axis.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let m = self.m as isize;
        let j = j as isize;
        let s = if j < (m + 1) / 2 { j } else { j - m };
        2.0 * std::f64::consts::PI * s as f64 / self.l
    }

    /// Per-axis integer coordinates of a flat site index.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut r = idx;
        for a in (0..self.d).rev() {
            c[a] = r % self.m;
            r /= self.m;
        }
        c
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        (0..self.d).fold(0, |acc, a| acc * self.m + c[a] % self.m)
    }

    /// Position of a site, x = h·(ix, iy, iz).
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let h = self.h();
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// Minimal-image integer displacement from site `i` to site `j`, each
    /// component in [−M/2, M/2).
    pub fn displacement(&self, i: usize, j: usize) -> [isize; 3] {
        let (ci, cj) = (self.coords(i), self.coords(j));
        let m = self.m as isize;
        let mut out = [0isize; 3];
        for a in 0..self.d {
            let mut s = (cj[a] as isize - ci[a] as isize).rem_euclid(m);
            if s >= m - m / 2 {
                s -= m;
            }
            out[a] = s;
        }
        out
    }

    /// Periodic distance |x_i − x_j| along the minimal image.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let s = self.displacement(i, j);
        let h = self.h();
        (s.iter().map(|&v| (v as f64 * h).powi(2)).sum::<f64>()).sqrt()
    }

    /// |x| of a site measured along the minimal image of the origin.
    pub fn radius(&self, idx: usize) -> f64 {
        self.distance(0, idx)
    }

    /// |k|² for every site of the Fourier array.
    pub fn k2(&self) -> Vec<f64> {
        let kk: Vec<f64> = (0..self.m).map(|j| self.wavenumber(j).powi(2)).collect();
        (0..self.n_sites())
            .map(|i| {
                let c = self.coords(i);
                (0..self.d).map(|a| kk[c[a]]).sum()
            })
            .collect()
    }

    /// Wavevector component along `axis` for every site of the Fourier array.
    pub fn k_axis(&self, axis: usize) -> Vec<f64> {
        (0..self.n_sites()).map(|i| self.wavenumber(self.coords(i)[axis])).collect()
    }

    pub fn max_k2(&self) -> f64 {
        self.k2().into_iter().fold(0.0, f64::max)
    }

    /// Grid with twice as many points per axis over the same box.
    pub fn doubled(&self) -> Grid {
        Grid { d: self.d, m: 2 * self.m, l: self.l }
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::pre(format!("grid mismatch: {self:?} vs {other:?}")));
        }
        Ok(())
    }

    /// Unnormalized forward FFT over all axes, in place.
    pub fn fft(&self, data: &mut [C64]) {
        self.transform(data, false);
    }

    /// Inverse FFT including the 1/M^d normalization, in place.
    pub fn ifft(&self, data: &mut [C64]) {
        self.transform(data, true);
        let s = 1.0 / self.n_sites() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn transform(&self, data: &mut [C64], inverse: bool) {
        assert_eq!(data.len(), self.n_sites());
        let m = self.m;
        let fft = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            if inverse {
                p.plan_fft_inverse(m)
            } else {
                p.plan_fft_forward(m)
            }
        });
        let mut line = vec![C64::new(0.0, 0.0); m];
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let n = self.n_sites();
        for axis in 0..self.d {
            let stride = m.pow((self.d - 1 - axis) as u32);
            for start in 0..n {
                if (start / stride) % m != 0 {
                    continue;
                }
                for (j, z) in line.iter_mut().enumerate() {
                    *z = data[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, z) in line.iter().enumerate() {
                    data[start + j * stride] = *z;
                }
            }
        }
    }

    /// Real symmetric matrix of −Δ acting on site values (spectral).
    pub fn neg_laplacian_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n_sites();
        let k2 = self.k2();
        let mut out = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            col[j] = C64::new(1.0, 0.0);
            self.fft(&mut col);
            col.iter_mut().zip(&k2).for_each(|(z, k)| *z *= *k);
            self.ifft(&mut col);
            for i in 0..n {
                out[(i, j)] = col[i].re;
            }
        }
        // exact symmetry; the spectral operator is a circulant
        let sym = (&out + out.transpose()) * 0.5;
        sym
    }
}

/// Samples of a complex function on a grid. Integrals use the rectangle
/// rule ∫f ≈ h^d Σ f.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub data: Vec<C64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field { grid, data: vec![C64::new(0.0, 0.0); grid.n_sites()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> C64) -> Self {
        let data = (0..grid.n_sites()).map(|i| f(grid.position(i))).collect();
        Field { grid, data }
    }

    pub fn from_index_fn(grid: Grid, f: impl Fn(usize) -> C64) -> Self {
        Field { grid, data: (0..grid.n_sites()).map(f).collect() }
    }

    pub fn from_vec(grid: Grid, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.n_sites() {
            return Err(Error::pre(format!(
                "field has {} samples, grid has {} sites",
                data.len(),
                grid.n_sites()
            )));
        }
        Ok(Field { grid, data })
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field { grid: self.grid, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: C64) -> Field {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    pub fn abs2(&self) -> Field {
        self.map(|z| C64::new(z.norm_sqr(), 0.0))
    }

    pub fn add(&self, other: &Field) -> Field {
        Field { grid: self.grid, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Field) -> Field {
        Field { grid: self.grid, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Field {
        Field { grid: self.grid, data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect() }
    }

    pub fn spectrum(&self) -> Vec<C64> {
        let mut s = self.data.clone();
        self.grid.fft(&mut s);
        s
    }

    pub fn from_spectrum(grid: Grid, mut s: Vec<C64>) -> Field {
        grid.ifft(&mut s);
        Field { grid, data: s }
    }

    /// Apply a Fourier multiplier given as a function of the site's |k|².
    pub fn fourier_multiply(&self, f: impl Fn(f64) -> C64) -> Field {
        let k2 = self.grid.k2();
        let mut s = self.spectrum();
        s.iter_mut().zip(&k2).for_each(|(z, &k)| *z *= f(k));
        Field::from_spectrum(self.grid, s)
    }

    /// Spectral Laplacian Δf (coefficients times −|k|²).
    pub fn laplacian(&self) -> Field {
        self.fourier_multiply(|k2| C64::new(-k2, 0.0))
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Field {
        let k = self.grid.k_axis(axis);
        let mut s = self.spectrum();
        // the unpaired Nyquist mode has no well-defined odd derivative
        let nyq = self.grid.m % 2 == 0;
        for (i, z) in s.iter_mut().enumerate() {
            let c = self.grid.coords(i)[axis];
            if nyq && c == self.grid.m / 2 {
                *z = C64::new(0.0, 0.0);
            } else {
                *z *= C64::new(0.0, k[i]);
            }
        }
        Field::from_spectrum(self.grid, s)
    }

    /// Periodic convolution (W∗ρ)(x) = h^d Σ_y W(x−y)ρ(y).
    pub fn convolve(&self, rho: &Field) -> Result<Field> {
        self.grid.check_same(&rho.grid)?;
        let mut a = self.spectrum();
        let b = rho.spectrum();
        let cell = self.grid.cell();
        a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y * cell);
        Ok(Field::from_spectrum(self.grid, a))
    }

    /// ⟨f, g⟩ = h^d Σ f̄ g.
    pub fn inner(&self, g: &Field) -> Result<C64> {
        self.grid.check_same(&g.grid)?;
        let s: C64 = self.data.iter().zip(&g.data).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell())
    }

    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell()).sqrt()
    }

    /// H^s norm through the multiplier (1+|k|²)^{s/2}.
    pub fn norm_hs(&self, s: f64) -> f64 {
        let k2 = self.grid.k2();
        let spec = self.spectrum();
        let n = self.grid.n_sites() as f64;
        let sum: f64 = spec.iter().zip(&k2).map(|(z, k)| (1.0 + k).powf(s) * z.norm_sqr()).sum();
        (sum * self.grid.cell() / n).sqrt()
    }

    /// ‖∇f‖₂².
    pub fn grad_norm2(&self) -> f64 {
        let k2 = self.grid.k2();
        let spec = self.spectrum();
        let n = self.grid.n_sites() as f64;
        spec.iter().zip(&k2).map(|(z, k)| k * z.norm_sqr()).sum::<f64>() * self.grid.cell() / n
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Orthonormal coordinates c = h^{d/2} f, in which the quadrature inner
    /// product becomes the Euclidean one.
    pub fn coeffs(&self) -> Vec<C64> {
        let s = self.grid.cell().sqrt();
        self.data.iter().map(|z| z * s).collect()
    }

    pub fn from_coeffs(grid: Grid, c: &[C64]) -> Field {
        let s = 1.0 / grid.cell().sqrt();
        Field { grid, data: c.iter().map(|z| z * s).collect() }
    }

    /// Band-limited interpolation onto the doubled grid: value at the site
    /// with doubled coordinates n equals f at x = n·h/2. Even-M Nyquist
    /// coefficients are split symmetrically.
    pub fn refine2(&self) -> Field {
        let g = self.grid;
        let g2 = g.doubled();
        let spec = self.spectrum();
        let mut out = vec![C64::new(0.0, 0.0); g2.n_sites()];
        let m = g.m;
        let even = m % 2 == 0;
        for (i, &z) in spec.iter().enumerate() {
            let c = g.coords(i);
            // every axis index maps to one or (Nyquist) two target indices
            let mut targets: Vec<([usize; 3], f64)> = vec![([0; 3], 1.0)];
            for a in 0..g.d {
                let mut next = Vec::with_capacity(targets.len() * 2);
                for (t, w) in &targets {
                    let j = c[a];
                    if even && j == m / 2 {
                        let mut t1 = *t;
                        t1[a] = m / 2;
                        let mut t2 = *t;
                        t2[a] = 2 * m - m / 2;
                        next.push((t1, w * 0.5));
                        next.push((t2, w * 0.5));
                    } else {
                        let mut t1 = *t;
                        t1[a] = if j < (m + 1) / 2 { j } else { j + m };
                        next.push((t1, *w));
                    }
                }
                targets = next;
            }
            for (t, w) in targets {
                out[g2.index(t)] += z * w;
            }
        }
        // account for the different inverse normalization of the finer grid
        let scale = (g2.n_sites() / g.n_sites()) as f64;
        out.iter_mut().for_each(|z| *z *= scale);
        Field::from_spectrum(g2, out)
    }

    /// Write the CFLD snapshot: magic, u32 version, u32 d, u32 M, f64 L,
    /// then the site samples as (re, im) pairs, little-endian, row-major.
    pub fn write_snapshot(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"CFLD")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.grid.d as u32).to_le_bytes())?;
        w.write_all(&(self.grid.m as u32).to_le_bytes())?;
        w.write_all(&self.grid.l.to_le_bytes())?;
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot(r: &mut impl Read) -> Result<Field> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CFLD" {
            return Err(Error::Format("bad field snapshot magic".into()));
        }
        let version = read_u32(r)?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported field snapshot version {version}")));
        }
        let d = read_u32(r)? as usize;
        let m = read_u32(r)? as usize;
        let l = read_f64(r)?;
        let grid = if d == 1 && !(m >= 8 && m.is_power_of_two()) {
            Grid::small_lattice(m, l)
        } else {
            Grid::new(d, m, l)
        }
        .map_err(|e| Error::Format(e.to_string()))?;
        let mut data = Vec::with_capacity(grid.n_sites());
        for _ in 0..grid.n_sites() {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            data.push(C64::new(re, im));
        }
        Ok(Field { grid, data })
    }
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn smooth(grid: Grid) -> Field {
        let l = grid.l;
        Field::from_fn(grid, |x| {
            let a = (2.0 * PI * x[0] / l).sin();
            let b = (2.0 * PI * (x[1] + 0.3 * x[2]) / l).cos();
            C64::new((a + 0.5 * b).exp(), 0.3 * (a * b).sin())
        })
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(2, 16, -1.0).is_err());
    }

    #[test]
    fn wavenumber_ordering() {
        let g = Grid::new(1, 8, 2.0 * PI).unwrap();
        let ks: Vec<f64> = (0..8).map(|j| g.wavenumber(j)).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn plane_wave_is_laplacian_eigenfunction() {
        let g = Grid::new(3, 8, 3.0).unwrap();
        let kv = [2.0 * PI / 3.0 * 2.0, -2.0 * PI / 3.0, 2.0 * PI];
        let f = Field::from_fn(g, |x| C64::from_polar(1.0, kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2]));
        let k2: f64 = kv.iter().map(|k| k * k).sum();
        let lap = f.laplacian();
        let err = lap.sub(&f.scale(C64::new(-k2, 0.0))).data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12 * k2.max(1.0), "{err}");
    }

    #[test]
    fn constant_has_zero_laplacian() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = Field::from_fn(g, |_| C64::new(2.5, -1.0));
        assert!(f.laplacian().norm() < 1e-12);
    }

    #[test]
    fn laplacian_agrees_with_finite_differences_at_second_order() {
        let mut errs = vec![];
        let mut hs = vec![];
        for m in [32, 64, 128] {
            let g = Grid::new(1, m, 2.0).unwrap();
            let f = smooth(g);
            let h = g.h();
            let fd: Vec<C64> = (0..m)
                .map(|i| (f.data[(i + 1) % m] - f.data[i] * 2.0 + f.data[(i + m - 1) % m]) / (h * h))
                .collect();
            let lap = f.laplacian();
            let e = lap.data.iter().zip(&fd).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            errs.push(e);
            hs.push(h);
        }
        let slope = crate::linalg::loglog_slope(&hs, &errs);
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn delta_convolution_is_identity() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let mut delta = Field::zeros(g);
        delta.data[0] = C64::new(1.0 / g.cell(), 0.0);
        let rho = smooth(g);
        let out = delta.convolve(&rho).unwrap();
        assert!(out.sub(&rho).norm() < 1e-12 * rho.norm());
    }

    #[test]
    fn constant_convolution() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let w = Field::from_fn(g, |_| C64::new(2.0, 0.0));
        let r = Field::from_fn(g, |_| C64::new(0.5, 0.0));
        let out = w.convolve(&r).unwrap();
        for z in &out.data {
            assert!((z - C64::new(3.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let g = Grid::new(1, 32, 2.0).unwrap();
        let w = Field::from_fn(g, |x| C64::new((x[0] * 3.1).sin(), (x[0] * 1.7).cos().powi(3)));
        let r = Field::from_fn(g, |x| C64::new((x[0] * 0.7).exp(), x[0]));
        let out = w.convolve(&r).unwrap();
        for i in 0..32 {
            let direct: C64 = (0..32).map(|j| w.data[(i + 32 - j) % 32] * r.data[j]).sum::<C64>() * g.cell();
            assert!((out.data[i] - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn convolution_grid_mismatch_is_error() {
        let a = Field::zeros(Grid::new(1, 16, 1.0).unwrap());
        let b = Field::zeros(Grid::new(1, 32, 1.0).unwrap());
        assert!(a.convolve(&b).is_err());
        assert!(a.inner(&b).is_err());
    }

    #[test]
    fn hs_norm_of_plane_wave() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let k = 2.0 * PI * 3.0 / 4.0;
        let f = Field::from_fn(g, |x| C64::from_polar(1.0, k * x[0]));
        assert!((f.norm_hs(1.0) - (1.0 + k * k).sqrt() * f.norm()).abs() < 1e-12);
        assert!((f.norm_hs(0.0) - f.norm()).abs() < 1e-12);
    }

    #[test]
    fn refine2_interpolates_band_limited_fields() {
        let g = Grid::new(2, 16, 2.0).unwrap();
        let f = smooth(g);
        let fine = f.refine2();
        // coarse sites are reproduced
        for i in 0..g.n_sites() {
            let c = g.coords(i);
            let j = fine.grid.index([2 * c[0], 2 * c[1], 0]);
            assert!((fine.data[j] - f.data[i]).norm() < 1e-12);
        }
        // trigonometric polynomial below Nyquist is reproduced exactly
        let g1 = Grid::new(1, 16, 2.0).unwrap();
        let t = |x: f64| C64::new((PI * 3.0 * x).cos(), (PI * 5.0 * x).sin());
        let f1 = Field::from_fn(g1, |x| t(x[0]));
        let r = f1.refine2();
        for i in 0..32 {
            assert!((r.data[i] - t(i as f64 * g1.h() / 2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(2, 8, 1.5).unwrap();
        let f = smooth(g);
        let mut buf = vec![];
        f.write_snapshot(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CFLD");
        let back = Field::read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn laplacian_matrix_matches_operator() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        let l = g.neg_laplacian_matrix();
        let f = smooth(g);
        let lap = f.laplacian();
        for i in 0..16 {
            let v: C64 = (0..16).map(|j| f.data[j] * l[(i, j)]).sum();
            assert!((v + lap.data[i]).norm() < 1e-10);
        }
    }

    fn random_field(grid: Grid, vals: &[(f64, f64)]) -> Field {
        Field { grid, data: vals.iter().map(|&(a, b)| C64::new(a, b)).collect() }
    }

    proptest! {
        #[test]
        fn fft_round_trip(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
            let g = Grid::new(2, 8, 1.0).unwrap();
            let f = random_field(g, &vals);
            let back = Field::from_spectrum(g, f.spectrum());
            prop_assert!(back.sub(&f).norm() <= 1e-12 * (1.0 + f.norm()));
            // Parseval
            let spec = f.spectrum();
            let ps = (spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.cell() / 64.0).sqrt();
            prop_assert!((ps - f.norm()).abs() <= 1e-12 * (1.0 + f.norm()));
        }

        #[test]
        fn convolution_bilinear_commutative_real(
            a in proptest::collection::vec(-1.0f64..1.0, 16),
            b in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            let g = Grid::new(1, 16, 2.0).unwrap();
            let w = Field::from_fn(g, |x| {
                let i = (x[0] / g.h()).round() as usize;
                C64::new(a[i.min(16 - i) % 16] + a[(16 - i) % 16], 0.0)
            });
            let r = Field { grid: g, data: b.iter().map(|&v| C64::new(v, 0.0)).collect() };
            let wr = w.convolve(&r).unwrap();
            let rw = r.convolve(&w).unwrap();
            prop_assert!(wr.sub(&rw).norm() < 1e-12);
            prop_assert!(wr.data.iter().all(|z| z.im.abs() < 1e-12));
            let two = w.convolve(&r.scale(C64::new(2.0, 0.0))).unwrap();
            prop_assert!(two.sub(&wr.scale(C64::new(2.0, 0.0))).norm() < 1e-12);
        }

        #[test]
        fn laplacian_self_adjoint(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 32),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 32),
        ) {
            let g = Grid::new(1, 32, 3.0).unwrap();
            let f = random_field(g, &a);
            let h = random_field(g, &b);
            let lhs = f.laplacian().inner(&h).unwrap();
            let rhs = f.inner(&h.laplacian()).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * f.norm() * h.norm());
        }
    }
}
