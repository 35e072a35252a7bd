//! Correlation kernel k = Q⊗Q[−Nω(x−y)φ²((x+y)/2)], its cosh/sinh
//! functions and decompositions, and the limiting kernel.
//!
//! Kernels are stored as operator matrices in the orthonormal site basis:
//! the entry (x, y) is h^d·J(x;y). Operator products, adjoints and
//! Frobenius norms of these matrices are then the continuum ones.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{read_f64, read_u32, Field, Grid};
use crate::linalg::{self, c, CMat};
use crate::scattering::{omega_infinity, omega_infinity_1d, ScatteringSolution};

/// Largest number of sites for which dense kernels are built.
pub const MAX_SITES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    Hermitian,
    None,
}

#[derive(Clone, Debug)]
pub struct Kernel {
    pub grid: Grid,
    pub op: CMat,
    pub sym: Symmetry,
}

impl Kernel {
    pub fn zeros(grid: Grid, sym: Symmetry) -> Self {
        let n = grid.n_sites();
        Kernel { grid, op: CMat::zeros(n, n), sym }
    }

    pub fn identity(grid: Grid) -> Self {
        Kernel { grid, op: linalg::identity(grid.n_sites()), sym: Symmetry::Hermitian }
    }

    /// From point values J(x;y).
    pub fn from_values(grid: Grid, values: CMat, sym: Symmetry) -> Self {
        Kernel { grid, op: values * c(grid.cell()), sym }
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.op[(i, j)] / self.grid.cell()
    }

    pub fn hs_norm(&self) -> f64 {
        linalg::hs_norm(&self.op)
    }

    /// ‖∇₁k‖_HS with the gradient taken spectrally in the first slot.
    pub fn grad_hs_norm(&self) -> f64 {
        let n = self.grid.n_sites();
        let k2 = self.grid.k2();
        let mut total = 0.0;
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = self.op[(i, j)];
            }
            self.grid.fft(&mut col);
            total += col.iter().zip(&k2).map(|(z, k)| k * z.norm_sqr()).sum::<f64>() / n as f64;
        }
        total.sqrt()
    }

    /// Relative violation of the declared symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = linalg::hs_norm(&self.op).max(1e-300);
        match self.sym {
            Symmetry::Symmetric => linalg::hs_norm(&(&self.op - self.op.transpose())) / scale,
            Symmetry::Hermitian => linalg::hs_norm(&(&self.op - self.op.adjoint())) / scale,
            Symmetry::None => 0.0,
        }
    }

    /// CKRN dump: magic, u32 version, u32 d, u32 M, f64 L, then the point
    /// values J(x;y) row-major as (re, im) little-endian pairs.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"CKRN")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.grid.d as u32).to_le_bytes())?;
        w.write_all(&(self.grid.m as u32).to_le_bytes())?;
        w.write_all(&self.grid.l.to_le_bytes())?;
        let n = self.grid.n_sites();
        for i in 0..n {
            for j in 0..n {
                let z = self.value(i, j);
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_dump(r: &mut impl Read, sym: Symmetry) -> Result<Kernel> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CKRN" {
            return Err(Error::Format("bad kernel dump magic".into()));
        }
        if read_u32(r)? != 1 {
            return Err(Error::Format("unsupported kernel dump version".into()));
        }
        let d = read_u32(r)? as usize;
        let m = read_u32(r)? as usize;
        let l = read_f64(r)?;
        let grid = if d == 1 && !(m >= 8 && m.is_power_of_two()) { Grid::small_lattice(m, l) } else { Grid::new(d, m, l) }
            .map_err(|e| Error::Format(e.to_string()))?;
        let n = grid.n_sites();
        let mut vals = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let re = read_f64(r)?;
                let im = read_f64(r)?;
                vals[(i, j)] = C64::new(re, im);
            }
        }
        Ok(Kernel::from_values(grid, vals, sym))
    }
}

/// Radial profile r ↦ Nω(r) entering the kernel, with its support radius
/// and the value used on the diagonal.
#[derive(Clone)]
pub struct Profile {
    pub ell: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    diag: f64,
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Profile").field("ell", &self.ell).field("diag", &self.diag).finish()
    }
}

impl Profile {
    pub fn zero(ell: f64) -> Self {
        Profile { ell, f: Arc::new(|_| 0.0), diag: 0.0 }
    }

    /// N·ω_N from a scattering solution.
    pub fn from_scattering(s: &ScatteringSolution) -> Self {
        let s = Arc::new(s.clone());
        let n = s.n();
        let diag = n * s.omega_at(0.0);
        let s2 = s.clone();
        Profile { ell: s.ell, f: Arc::new(move |r| n * s2.omega_at(r)), diag }
    }

    /// Arbitrary profile (used by tests and oracles).
    pub fn custom(ell: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let diag = f(0.0);
        Profile { ell, f: Arc::new(f), diag }
    }

    /// ω_∞ on a grid of dimension 1 or 3. The 3D diagonal uses the average
    /// of ω_∞ over the ball of radius h/2, where ω_∞ is singular. In 1D the
    /// profile is continuous and the diagonal is its value at 0, which is
    /// the pointwise limit of Nω_N(0).
    pub fn limit(b0: f64, ell: f64, grid: &Grid) -> Result<Self> {
        match grid.d {
            3 => {
                let a = grid.h() / 2.0;
                let diag = b0 / (8.0 * PI) * (1.5 / a - 1.5 / ell + 0.6 * a * a / (2.0 * ell.powi(3)));
                Ok(Profile { ell, f: Arc::new(move |r| omega_infinity(b0, ell, r).unwrap_or(0.0)), diag })
            }
            1 => {
                let diag = omega_infinity_1d(b0, ell, 0.0);
                Ok(Profile { ell, f: Arc::new(move |r| omega_infinity_1d(b0, ell, r)), diag })
            }
            d => Err(Error::config(format!("no limiting profile implemented for d = {d}"))),
        }
    }

    pub fn at(&self, r: f64) -> f64 {
        if r == 0.0 {
            self.diag
        } else if r > self.ell {
            0.0
        } else {
            (self.f)(r)
        }
    }
}

fn check_kernel_grid(grid: &Grid, ell: f64) -> Result<()> {
    if grid.n_sites() > MAX_SITES {
        return Err(Error::config(format!(
            "{} sites exceed the dense kernel cap of {MAX_SITES}",
            grid.n_sites()
        )));
    }
    if !(ell < grid.l / 4.0) {
        return Err(Error::config(format!("ℓ = {ell} must be below L/4 = {}", grid.l / 4.0)));
    }
    Ok(())
}

/// Flat index on the doubled grid of the minimal-image midpoint of sites
/// i and j.
pub fn midpoint_index(grid: &Grid, i: usize, j: usize) -> usize {
    let ci = grid.coords(i);
    let s = grid.displacement(i, j);
    let g2 = grid.doubled();
    let m2 = g2.m as isize;
    let mut c2 = [0usize; 3];
    for a in 0..grid.d {
        c2[a] = (2 * ci[a] as isize + s[a]).rem_euclid(m2) as usize;
    }
    g2.index(c2)
}

/// Point values F(x;y) = −Nω(|x−y|)·g(mid) where `g_fine` lives on the
/// doubled grid.
pub(crate) fn pair_values(grid: &Grid, prof: &Profile, g_fine: &Field) -> CMat {
    let n = grid.n_sites();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let r = grid.distance(i, j);
            let w = prof.at(r);
            if w != 0.0 {
                out[(i, j)] = -g_fine.data[midpoint_index(grid, i, j)] * w;
            }
        }
    }
    out
}

/// Q = 1 − c c† in orthonormal coordinates.
pub fn projector(phi: &Field) -> CMat {
    let cf = linalg::CVec::from_vec(phi.coeffs());
    linalg::identity(cf.len()) - &cf * cf.adjoint()
}

/// Raw and (optionally) projected kernel.
pub fn build_k(prof: &Profile, phi: &Field, project: bool) -> Result<(Kernel, Kernel)> {
    let grid = phi.grid;
    check_kernel_grid(&grid, prof.ell)?;
    let fine = phi.refine2();
    let sq = fine.mul(&fine);
    let raw = Kernel::from_values(grid, pair_values(&grid, prof, &sq), Symmetry::Symmetric);
    let k = if project {
        let q = projector(phi);
        Kernel { grid, op: linalg::mm3(&q, &raw.op, &q.transpose()), sym: Symmetry::Symmetric }
    } else {
        raw.clone()
    };
    Ok((k, raw))
}

/// Limiting kernel Q⊗Q[−ω_∞(x−y)φ²(mid)].
pub fn build_k_limit(b0: f64, ell: f64, phi: &Field) -> Result<Kernel> {
    let prof = Profile::limit(b0, ell, &phi.grid)?;
    Ok(build_k(&prof, phi, true)?.0)
}

/// ∂t k by the chain rule through φ and ∂tφ.
pub fn kernel_time_derivative(prof: &Profile, phi: &Field, dphi: &Field, project: bool) -> Result<Kernel> {
    let grid = phi.grid;
    check_kernel_grid(&grid, prof.ell)?;
    let f = phi.refine2();
    let df = dphi.refine2();
    let two_f_df = f.mul(&df).scale(c(2.0));
    let draw = Kernel::from_values(grid, pair_values(&grid, prof, &two_f_df), Symmetry::Symmetric);
    if !project {
        return Ok(draw);
    }
    let raw = Kernel::from_values(grid, pair_values(&grid, prof, &f.mul(&f)), Symmetry::Symmetric);
    let q = projector(phi);
    let cf = linalg::CVec::from_vec(phi.coeffs());
    let dc = linalg::CVec::from_vec(dphi.coeffs());
    let dq = -(&dc * cf.adjoint() + &cf * dc.adjoint());
    let op = linalg::mm3(&q, &draw.op, &q.transpose())
        + linalg::mm3(&dq, &raw.op, &q.transpose())
        + linalg::mm3(&q, &raw.op, &dq.transpose());
    Ok(Kernel { grid, op, sym: Symmetry::Symmetric })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChShMethod {
    /// Series below ‖k‖_HS = 1, spectral above.
    Auto,
    Spectral,
    Series,
}

/// ch, sh and the decompositions p = ch − 1, r = sh − k, v = k − k_raw.
#[derive(Clone, Debug)]
pub struct ShChPack {
    pub k: Kernel,
    pub k_raw: Kernel,
    pub ch: Kernel,
    pub sh: Kernel,
    pub p: Kernel,
    pub r: Kernel,
    pub v: Kernel,
}

impl ShChPack {
    /// ch ch† − sh sh† − 1 and ch shᵀ − sh chᵀ in Frobenius norm.
    pub fn identity_defects(&self) -> (f64, f64) {
        let n = self.k.op.nrows();
        let a = linalg::mm(&self.ch.op, &self.ch.op.adjoint()) - linalg::mm(&self.sh.op, &self.sh.op.adjoint())
            - linalg::identity(n);
        let b = linalg::mm(&self.ch.op, &self.sh.op.transpose()) - linalg::mm(&self.sh.op, &self.ch.op.transpose());
        (linalg::hs_norm(&a), linalg::hs_norm(&b))
    }
}

/// (ch, sh) operator matrices of a symmetric k.
pub fn cosh_sinh_ops(k: &CMat, method: ChShMethod) -> Result<(CMat, CMat)> {
    let n = k.nrows();
    let norm = linalg::hs_norm(k);
    let use_series = match method {
        ChShMethod::Series => true,
        ChShMethod::Spectral => false,
        ChShMethod::Auto => norm < 1.0,
    };
    if use_series {
        if norm >= 10.0 {
            return Err(Error::pre(format!("‖k‖_HS = {norm} too large for the series")));
        }
        let x = linalg::mm(k, &linalg::conj(k));
        let mut ch = linalg::identity(n);
        let mut sh_left = linalg::identity(n);
        let mut term = linalg::identity(n);
        for m in 1..200 {
            term = linalg::mm(&term, &x);
            let fc = 1.0 / factorial(2 * m);
            let fs = 1.0 / factorial(2 * m + 1);
            ch += &term * c(fc);
            sh_left += &term * c(fs);
            if linalg::hs_norm(&term) * fc < 1e-18 {
                break;
            }
        }
        Ok((ch, linalg::mm(&sh_left, k)))
    } else {
        let x = linalg::mm(k, &k.adjoint());
        let (vals, u) = linalg::herm_eigen(&x);
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("bogokernel", "eigen-decomposition of k k̄ failed"));
        }
        let s: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
        let scale = |f: &dyn Fn(f64) -> f64| -> CMat {
            let mut w = u.clone();
            for (j, &sj) in s.iter().enumerate() {
                let fj = f(sj);
                w.column_mut(j).iter_mut().for_each(|z| *z *= fj);
            }
            linalg::mm(&w, &u.adjoint())
        };
        let ch = scale(&|s: f64| s.cosh());
        let sinhc = scale(&|s: f64| if s < 1e-8 { 1.0 + s * s / 6.0 } else { s.sinh() / s });
        Ok((ch, linalg::mm(&sinhc, k)))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

pub fn cosh_sinh(k: &Kernel, k_raw: &Kernel, method: ChShMethod) -> Result<ShChPack> {
    let grid = k.grid;
    let (ch, sh) = cosh_sinh_ops(&k.op, method)?;
    let n = grid.n_sites();
    let p = &ch - linalg::identity(n);
    let r = &sh - &k.op;
    let v = &k.op - &k_raw.op;
    let wrap = |op: CMat, sym| Kernel { grid, op, sym };
    Ok(ShChPack {
        k: k.clone(),
        k_raw: k_raw.clone(),
        ch: wrap(ch, Symmetry::Hermitian),
        sh: wrap(sh, Symmetry::Symmetric),
        p: wrap(p, Symmetry::Hermitian),
        r: wrap(r, Symmetry::Symmetric),
        v: wrap(v, Symmetry::Symmetric),
    })
}
