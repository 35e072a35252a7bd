//! One-particle block representation (A, B, c) of quadratic Fock
//! operators
//!
//!   G = Σ A_ij a*_i a_j + ½ Σ (B_ij a*_i a*_j + B̄_ij a_i a_j) + c
//!
//! in an orthonormal mode basis, and the assembly of the generators of the
//! fluctuation dynamics.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use crate::bogokernel::{self, ChShMethod, Kernel, Profile, ShChPack, Symmetry};
use crate::error::{Error, Result};
use crate::grid::{read_f64, read_u32, Field, Grid};
use crate::linalg::{self, c, CMat, CVec, I};
use crate::scattering::{Mode, ScatteringSolution};

#[derive(Clone, Debug)]
pub struct QuadraticGenerator {
    pub a: CMat,
    pub b: CMat,
    pub c: C64,
    pub t: f64,
}

impl QuadraticGenerator {
    pub fn new(a: CMat, b: CMat, c: C64, t: f64) -> Result<Self> {
        if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
            return Err(Error::pre("generator blocks must be square and of equal size"));
        }
        Ok(QuadraticGenerator { a, b, c, t })
    }

    pub fn zero(n: usize) -> Self {
        QuadraticGenerator { a: CMat::zeros(n, n), b: CMat::zeros(n, n), c: C64::new(0.0, 0.0), t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// (‖A − A†‖/‖A‖, ‖B − Bᵀ‖/‖B‖, |Im c|/(1+|c|)).
    pub fn invariant_residuals(&self) -> (f64, f64, f64) {
        let ra = linalg::hs_norm(&(&self.a - self.a.adjoint())) / linalg::hs_norm(&self.a).max(1e-300);
        let rb = linalg::hs_norm(&(&self.b - self.b.transpose())) / linalg::hs_norm(&self.b).max(1e-300);
        (ra, rb, self.c.im.abs() / (1.0 + self.c.norm()))
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let (ra, rb, rc) = self.invariant_residuals();
        if ra > tol || rb > tol || rc > tol {
            return Err(Error::numerical(
                "quadgen",
                format!("generator invariants violated: A {ra:.2e}, B {rb:.2e}, c {rc:.2e}"),
            ));
        }
        Ok(())
    }

    /// Matrix 𝒜' with d/dt (a, a*) = −i 𝒜' (a, a*) under the Heisenberg
    /// flow of G: [[A, B], [−B̄, −Ā]].
    pub fn heisenberg_matrix(&self) -> CMat {
        let n = self.dim();
        let mut m = CMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, n)).copy_from(&self.b);
        m.view_mut((n, 0), (n, n)).copy_from(&(-linalg::conj(&self.b)));
        m.view_mut((n, n), (n, n)).copy_from(&(-linalg::conj(&self.a)));
        m
    }

    /// Generator dump "CGEN": u32 version, u32 n, f64 t, f64 Re c, f64 Im c,
    /// then A and B row-major as little-endian (re, im) pairs.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"CGEN")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for v in [self.t, self.c.re, self.c.im] {
            w.write_all(&v.to_le_bytes())?;
        }
        write_matrix(w, &self.a)?;
        write_matrix(w, &self.b)
    }

    pub fn read_dump(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CGEN" || read_u32(r)? != 1 {
            return Err(Error::Format("bad generator dump header".into()));
        }
        let n = read_u32(r)? as usize;
        let t = read_f64(r)?;
        let c = C64::new(read_f64(r)?, read_f64(r)?);
        let a = read_matrix(r, n)?;
        let b = read_matrix(r, n)?;
        Ok(QuadraticGenerator { a, b, c, t })
    }
}

pub(crate) fn write_matrix(w: &mut impl Write, m: &CMat) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn read_matrix(r: &mut impl Read, n: usize) -> Result<CMat> {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = C64::new(read_f64(r)?, read_f64(r)?);
        }
    }
    Ok(m)
}

/// −Δ in orthonormal coordinates (spectral).
pub fn neg_laplacian_op(grid: &Grid) -> CMat {
    grid.neg_laplacian_matrix().map(|v| c(v))
}

/// Dense matrix M_ij = F(x_i − x_j) of a field given as a function of the
/// displacement from the origin.
pub fn displacement_matrix(f: &Field) -> CMat {
    let g = f.grid;
    let n = g.n_sites();
    let m = g.m as isize;
    CMat::from_fn(n, n, |i, j| {
        let s = g.displacement(j, i);
        let mut idx = [0usize; 3];
        for a in 0..g.d {
            idx[a] = s[a].rem_euclid(m) as usize;
        }
        f.data[g.index(idx)]
    })
}

fn coeff_vec(phi: &Field) -> CVec {
    CVec::from_vec(phi.coeffs())
}

/// Mean-field Bogoliubov generator of the Hartree flow with pair
/// potential `v` (sampled as a function of the displacement):
/// A = −Δ + V∗|φ|² + φ(x)V(x−y)φ̄(y), B = φ(x)V(x−y)φ(y).
///
/// B is stored as the pair-creation kernel, which is the complex conjugate
/// of the block written next to D in the flow matrix [[D, −B̄], [B, −D̄]].
pub fn meanfield_generator(phi: &Field, v: &Field) -> Result<QuadraticGenerator> {
    phi.grid.check_same(&v.grid)?;
    let norm = phi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::pre(format!("condensate norm {norm} differs from 1")));
    }
    let n = phi.grid.n_sites();
    let vm = displacement_matrix(v);
    let cf = coeff_vec(phi);
    let w = v.convolve(&phi.abs2())?;
    let mut a = neg_laplacian_op(&phi.grid);
    for i in 0..n {
        a[(i, i)] += c(w.data[i].re);
    }
    let a = a + CMat::from_fn(n, n, |i, j| cf[i] * vm[(i, j)] * cf[j].conj());
    let b = CMat::from_fn(n, n, |i, j| cf[i] * vm[(i, j)] * cf[j]);
    QuadraticGenerator::new(a, b, c(0.0), 0.0)
}

/// Projected pair kernels K₁ = Q K̃₁ Q and K₂ = (Q⊗Q) K̃₂, with
/// K̃₁(x;y) = φ(x)V(x−y)φ̄(y) and K̃₂(x;y) = φ(x)V(x−y)φ(y).
#[derive(Clone, Debug)]
pub struct PairKernels {
    pub k1: CMat,
    pub k2: CMat,
    pub k1_op_norm: f64,
}

fn project_pair(phi: &Field, k1t: CMat, k2t: CMat, project: bool) -> PairKernels {
    let (k1, k2) = if project {
        let q = bogokernel::projector(phi);
        (linalg::mm3(&q, &k1t, &q), linalg::mm3(&q, &k2t, &q.transpose()))
    } else {
        (k1t, k2t)
    };
    let k1_op_norm = linalg::op_norm(&k1);
    PairKernels { k1, k2, k1_op_norm }
}

pub fn build_k1_k2(phi: &Field, v: &Field, project: bool) -> Result<PairKernels> {
    phi.grid.check_same(&v.grid)?;
    let vm = displacement_matrix(v);
    let cf = coeff_vec(phi);
    let n = cf.len();
    let k1t = CMat::from_fn(n, n, |i, j| cf[i] * vm[(i, j)] * cf[j].conj());
    let k2t = CMat::from_fn(n, n, |i, j| cf[i] * vm[(i, j)] * cf[j]);
    Ok(project_pair(phi, k1t, k2t, project))
}

/// Contact version: V replaced by b₀δ.
pub fn build_k1_k2_contact(phi: &Field, b0: f64, project: bool) -> PairKernels {
    let cf = coeff_vec(phi);
    let n = cf.len();
    let h = phi.grid.cell();
    let k1t = CMat::from_fn(n, n, |i, j| if i == j { c(b0 * cf[i].norm_sqr() / h) } else { c(0.0) });
    let k2t = CMat::from_fn(n, n, |i, j| if i == j { cf[i] * cf[i] * (b0 / h) } else { c(0.0) });
    project_pair(phi, k1t, k2t, project)
}

/// Normal-ordered accumulator Σ C a*a + Σ D a*a* + Σ E aa + s. Dressed
/// one-particle functions F_x are columns of operator matrices, so
/// ∫∫W(x;y) a*(F_x) a(G_y) contributes F W G†.
#[derive(Clone, Debug)]
struct Acc {
    c: CMat,
    d: CMat,
    e: CMat,
}

impl Acc {
    fn new(n: usize) -> Self {
        Acc { c: CMat::zeros(n, n), d: CMat::zeros(n, n), e: CMat::zeros(n, n) }
    }

    fn cre_ann(&mut self, f: &CMat, w: &CMat, g: &CMat) {
        self.c += linalg::mm3(f, w, &g.adjoint());
    }

    fn cre_cre(&mut self, f: &CMat, w: &CMat, g: &CMat) {
        self.d += linalg::mm3(f, w, &g.transpose());
    }

    fn ann_ann(&mut self, f: &CMat, w: &CMat, g: &CMat) {
        self.e += linalg::mm3(&linalg::conj(f), w, &g.adjoint());
    }

    fn scale(&mut self, s: f64) {
        self.c *= c(s);
        self.d *= c(s);
        self.e *= c(s);
    }

    /// Adds `other + h.c.`.
    fn add_with_hc(&mut self, other: &Acc) {
        self.c += &other.c + other.c.adjoint();
        self.d += &other.d + other.e.adjoint();
        self.e += &other.e + other.d.adjoint();
    }

    fn add(&mut self, other: &Acc) {
        self.c += &other.c;
        self.d += &other.d;
        self.e += &other.e;
    }

    /// Hermitian blocks and the relative residuals of C − C† and of
    /// (D + Dᵀ) − conj(E + Eᵀ).
    fn finalize(&self) -> (CMat, CMat, f64) {
        let a = (&self.c + self.c.adjoint()) * c(0.5);
        let b1 = &self.d + self.d.transpose();
        let b2 = linalg::conj(&(&self.e + self.e.transpose()));
        let b = (&b1 + &b2) * c(0.5);
        let ra = linalg::hs_norm(&(&self.c - self.c.adjoint())) / linalg::hs_norm(&self.c).max(1e-300);
        let rb = linalg::hs_norm(&(&b1 - &b2)) / linalg::hs_norm(&b1).max(1e-300);
        (a, b, ra.max(rb))
    }
}

/// How ∂tΘ_T is obtained for the (i∂tT)T* term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeDerivative {
    /// Fréchet derivative of the exponential along the chain-rule ∂tk.
    Frechet,
    /// Central differences of k(φ ± δ∂tφ).
    CentralDifference(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    pub project: bool,
    pub method: ChShMethod,
    pub dt_mode: TimeDerivative,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { project: true, method: ChShMethod::Auto, dt_mode: TimeDerivative::Frechet }
    }
}

/// Output of the fluctuation-generator assembly.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub gen: QuadraticGenerator,
    /// Real part of the phase η_N(t) (zero for the limiting generator); the
    /// imaginary part left by quadrature stays in `gen.c`.
    pub eta: f64,
    /// Scalar ½ tr A of the symmetrically ordered (i∂tT)T*.
    pub c_t: f64,
    /// Largest relative non-hermiticity seen in the bilinear assembly.
    pub residual: f64,
    /// Same for the (i∂tT)T* block.
    pub t_residual: f64,
    pub k1_op_norm: f64,
    pub pack: ShChPack,
}

/// Everything the assembly needs at one time, in orthonormal coordinates.
struct Ingredients<'a> {
    phi: &'a Field,
    /// V∗|φ|² as a diagonal operator.
    w: Vec<f64>,
    pair: PairKernels,
    /// ⟨φ, (V∗|φ|²)φ⟩.
    mu0: f64,
    /// N λ_N and r ↦ f_N(r) 1{r ≤ ℓ}.
    lambda_profile: Profile,
    n_lambda: f64,
    /// r ↦ Nω_N(r) for the kinetic pair term and the kernel.
    omega: Profile,
}

fn midpoint_kernel(grid: &Grid, prof: &Profile, g_fine: &Field) -> CMat {
    // pair_values carries the kernel sign −Nω
    let vals = -bogokernel::pair_values(grid, prof, g_fine);
    Kernel::from_values(*grid, vals, Symmetry::Symmetric).op
}

fn pack_for(prof: &Profile, phi: &Field, opts: &AssemblyOptions) -> Result<ShChPack> {
    let (k, raw) = bogokernel::build_k(prof, phi, opts.project)?;
    bogokernel::cosh_sinh(&k, &raw, opts.method)
}

fn assemble_bilinears(ing: &Ingredients, pack: &ShChPack) -> Result<Acc> {
    let grid = ing.phi.grid;
    let n = grid.n_sites();
    let id = linalg::identity(n);
    let lap = neg_laplacian_op(&grid);
    let (ch, sh, p, r, k, v) = (&pack.ch.op, &pack.sh.op, &pack.p.op, &pack.r.op, &pack.k.op, &pack.v.op);
    let wd = linalg::diag_real(&ing.w);
    let (k1, k2) = (&ing.pair.k1, &ing.pair.k2);
    let k1t = k1.transpose();
    let k2t = k2.transpose();
    let mut acc = Acc::new(n);

    // potential energy, diagonal part
    acc.cre_ann(ch, &wd, ch);
    acc.cre_cre(ch, &wd, sh);
    acc.ann_ann(ch, &wd, sh);
    acc.cre_ann(sh, &wd, sh);
    // K₁ part
    acc.cre_ann(ch, k1, ch);
    acc.cre_cre(ch, k1, sh);
    acc.ann_ann(ch, &k1t, sh);
    acc.cre_ann(sh, &k1t, sh);
    // K₂ bracket, conjugated as a whole
    let mut t2 = Acc::new(n);
    t2.cre_cre(&id, k2, p);
    t2.cre_ann(&id, k2, sh);
    t2.cre_cre(p, k2, p);
    t2.cre_ann(p, k2, sh);
    t2.cre_cre(&id, &k2t, p);
    t2.cre_ann(&id, &k2t, sh);
    t2.cre_ann(p, &k2t, sh);
    t2.ann_ann(sh, k2, sh);
    t2.scale(0.5);
    acc.add_with_hc(&t2);
    // condensate-mode pair terms
    let cf = coeff_vec(ing.phi);
    let g = CVec::from_iterator(n, cf.iter().zip(&ing.w).map(|(z, w)| z * *w));
    let mut t4 = Acc::new(n);
    t4.d = (&cf * cf.transpose()) * c(0.5 * ing.mu0) - &cf * g.transpose();
    acc.add_with_hc(&t4);

    // λ term
    let fine = ing.phi.refine2();
    let sq = fine.mul(&fine);
    let jl = midpoint_kernel(&grid, &ing.lambda_profile, &sq) * c(ing.n_lambda);
    let mut tl = Acc::new(n);
    tl.cre_cre(&id, &jl, &id);
    acc.add_with_hc(&tl);

    // kinetic part; −Δ_x acts on the second slot of the dressing kernels
    let pl = linalg::mm(p, &lap);
    let rl = linalg::mm(r, &lap);
    let vl = linalg::mm(v, &lap);
    let mut tk = Acc::new(n);
    tk.cre_ann(&id, &lap, &id);
    tk.cre_ann(&id, &id, &pl);
    tk.cre_cre(&id, &id, &vl);
    tk.cre_cre(&id, &id, &rl);
    tk.cre_ann(&pl, &id, ch);
    tk.cre_cre(&pl, &id, sh);
    tk.ann_ann(&rl, &id, &id);
    tk.ann_ann(&vl, &id, &id);
    tk.ann_ann(sh, &id, &pl);
    tk.cre_ann(&rl, &id, k);
    tk.cre_ann(&rl, &id, r);
    tk.cre_ann(k, &id, &rl);
    tk.cre_ann(k, &lap, k);
    acc.add(&tk);
    // midpoint pair term with φΔφ + ∇φ·∇φ = ½Δ(φ²)
    let half_lap_sq = sq.laplacian().scale(c(0.5));
    // midpoint_kernel returns +Nω·g(mid)
    let jk = midpoint_kernel(&grid, &ing.omega, &half_lap_sq);
    let mut tm = Acc::new(n);
    tm.cre_cre(&id, &jk, &id);
    tm.scale(0.5);
    acc.add_with_hc(&tm);
    Ok(acc)
}

/// One-particle blocks of (i∂tT)T*: with Π_T = exp(−Z), Z = [[0, k], [k̄, 0]],
/// the flow matrix is i (∂t e^{−Z}) e^{Z}. Returns (A, B, ½ tr A, residual).
fn t_term(
    prof: &Profile,
    phi: &Field,
    dphi: &Field,
    pack: &ShChPack,
    opts: &AssemblyOptions,
) -> Result<(CMat, CMat, f64, f64)> {
    let n = phi.grid.n_sites();
    let (dch, dsh) = match opts.dt_mode {
        TimeDerivative::Frechet => {
            let dk = bogokernel::kernel_time_derivative(prof, phi, dphi, opts.project)?;
            let k = &pack.k.op;
            let mut z = CMat::zeros(2 * n, 2 * n);
            z.view_mut((0, n), (n, n)).copy_from(&(-k));
            z.view_mut((n, 0), (n, n)).copy_from(&(-linalg::conj(k)));
            let mut dz = CMat::zeros(2 * n, 2 * n);
            dz.view_mut((0, n), (n, n)).copy_from(&(-&dk.op));
            dz.view_mut((n, 0), (n, n)).copy_from(&(-linalg::conj(&dk.op)));
            let (_, l) = linalg::expm_frechet(&z, &dz);
            // top row of ∂t e^{−Z} is (∂t ch, −∂t sh)
            (l.view((0, 0), (n, n)).into_owned(), -l.view((0, n), (n, n)).into_owned())
        }
        TimeDerivative::CentralDifference(delta) => {
            if !(delta > 0.0) {
                return Err(Error::config("finite-difference step must be positive"));
            }
            let shifted = |s: f64| -> Result<(CMat, CMat)> {
                let ph = phi.add(&dphi.scale(c(s)));
                let (k, _) = bogokernel::build_k(prof, &ph, opts.project)?;
                bogokernel::cosh_sinh_ops(&k.op, opts.method)
            };
            let (chp, shp) = shifted(delta)?;
            let (chm, shm) = shifted(-delta)?;
            ((chp - chm) * c(0.5 / delta), (shp - shm) * c(0.5 / delta))
        }
    };
    let (ch, sh) = (&pack.ch.op, &pack.sh.op);
    let a = (linalg::mm(&dch, ch) - linalg::mm(&dsh, &linalg::conj(sh))) * I;
    let b = (linalg::mm(&dch, sh) - linalg::mm(&dsh, &linalg::conj(ch))) * I;
    let scale = linalg::hs_norm(&a).max(1e-300);
    let ra = linalg::hs_norm(&(&a - a.adjoint())) / scale;
    let rb = linalg::hs_norm(&(&b - b.transpose())) / linalg::hs_norm(&b).max(1e-300);
    let a = (&a + a.adjoint()) * c(0.5);
    let b = (&b + b.transpose()) * c(0.5);
    let half_trace = 0.5 * a.trace().re;
    Ok((a, b, half_trace, ra.max(rb)))
}

fn finish(
    ing: &Ingredients,
    dphi: &Field,
    pack: ShChPack,
    opts: &AssemblyOptions,
    eta: C64,
    t: f64,
) -> Result<Assembled> {
    let acc = assemble_bilinears(ing, &pack)?;
    let (a, b, residual) = acc.finalize();
    if !(residual <= 1e-6) {
        return Err(Error::numerical(
            "quadgen",
            format!("assembled generator is not hermitian (relative residual {residual:.3e})"),
        ));
    }
    let (at, bt, c_t, t_residual) = t_term(&ing.omega, ing.phi, dphi, &pack, opts)?;
    let gen = QuadraticGenerator::new(a + at, b + bt, eta + c(c_t), t)?;
    Ok(Assembled { gen, eta: eta.re, c_t, residual, t_residual, k1_op_norm: ing.pair.k1_op_norm, pack })
}

fn check_inputs(phi: &Field, dphi: &Field) -> Result<()> {
    phi.grid.check_same(&dphi.grid)?;
    let norm = phi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::pre(format!("condensate norm {norm} differs from 1")));
    }
    Ok(())
}

fn inner_potential(phi: &Field, kernel: &Field) -> Result<f64> {
    let conv = kernel.convolve(&phi.abs2())?;
    Ok(phi.data.iter().zip(&conv.data).map(|(z, w)| z.norm_sqr() * w.re).sum::<f64>() * phi.grid.cell())
}

/// The generator 𝒢_{2,N,t} at time t for the condensate φ = φ_{N,t} with
/// ∂tφ taken from the modified Hartree flow.
pub fn assemble_g2nt(
    phi: &Field,
    dphi: &Field,
    scat: &ScatteringSolution,
    opts: &AssemblyOptions,
    t: f64,
) -> Result<Assembled> {
    check_inputs(phi, dphi)?;
    let grid = phi.grid;
    if scat.pot.mode.dim() != grid.d {
        return Err(Error::config("scattering mode and grid dimension differ"));
    }
    let pot = &scat.pot;
    let nn = scat.n();
    let vn = pot.sample_on_grid(&grid, |_| 1.0);
    let rho = phi.abs2();
    let wf = vn.convolve(&rho)?;
    let w: Vec<f64> = wf.data.iter().map(|z| z.re).collect();
    let pair = build_k1_k2(phi, &vn, opts.project)?;
    let mu0 = inner_potential(phi, &vn)?;
    let omega = Profile::from_scattering(scat);
    let sc = scat.clone();
    let lambda_profile = Profile::custom(scat.ell, move |r| sc.f_at(r));
    let pack = pack_for(&omega, phi, opts)?;
    let ing = Ingredients { phi, w, pair, mu0, lambda_profile, n_lambda: nn * scat.lambda, omega };

    // η_N(t)
    let one_minus_2f = pot.sample_on_grid(&grid, |r| 1.0 - 2.0 * scat.f_at(r));
    let v_omega = pot.sample_on_grid(&grid, |r| scat.omega_at(r));
    let mut eta = c((nn + 1.0) / 2.0 * inner_potential(phi, &one_minus_2f)? - inner_potential(phi, &v_omega)?);
    let (ch, sh) = (&pack.ch.op, &pack.sh.op);
    let n = grid.n_sites();
    for kx in 0..n {
        let col: f64 = sh.column(kx).iter().map(|z| z.norm_sqr()).sum();
        eta += c(ing.w[kx] * col);
    }
    let lap = neg_laplacian_op(&grid);
    eta += linalg::mm3(sh, &lap, &sh.adjoint()).trace();
    let shsh = linalg::mm(&sh.adjoint(), sh);
    let shch = linalg::mm(&sh.adjoint(), ch);
    eta += ing.pair.k1.component_mul(&shsh).sum();
    eta += c(ing.pair.k2.component_mul(&shch).sum().re);
    let cf = coeff_vec(phi);
    let qt = linalg::identity(n) - &cf * cf.transpose();
    let s1 = linalg::mm(sh, &qt);
    let c1 = linalg::mm(ch, &qt);
    let inner = linalg::mm(&s1.adjoint(), &c1);
    let vm = displacement_matrix(&vn);
    eta += vm.component_mul(&inner.map(|z| c(z.norm_sqr()))).sum() / c(2.0 * nn);

    finish(&ing, dphi, pack, opts, eta, t)
}

/// First-order λ in the limit: 3b₀/(8πℓ³) in 3D, b₀/(4ℓ) on the interval.
pub fn limit_lambda(mode: Mode, b0: f64, ell: f64) -> f64 {
    match mode {
        Mode::Radial3 => 3.0 * b0 / (8.0 * std::f64::consts::PI * ell.powi(3)),
        Mode::Interval1 => b0 / (4.0 * ell),
    }
}

/// The limiting generator 𝒢_{2,t} for φ_t solving the contact NLS. The
/// phase η is carried separately, so c holds only the (i∂tT)T* scalar.
pub fn assemble_g2t(phi: &Field, dphi: &Field, b0: f64, ell: f64, opts: &AssemblyOptions, t: f64) -> Result<Assembled> {
    check_inputs(phi, dphi)?;
    let grid = phi.grid;
    let mode = match grid.d {
        1 => Mode::Interval1,
        3 => Mode::Radial3,
        d => return Err(Error::config(format!("no limiting generator for d = {d}"))),
    };
    let w: Vec<f64> = phi.data.iter().map(|z| b0 * z.norm_sqr()).collect();
    let pair = build_k1_k2_contact(phi, b0, opts.project);
    let mu0 = phi.data.iter().map(|z| b0 * z.norm_sqr().powi(2)).sum::<f64>() * grid.cell();
    let omega = Profile::limit(b0, ell, &grid)?;
    let lambda_profile = Profile::custom(ell, |_| 1.0);
    let pack = pack_for(&omega, phi, opts)?;
    let ing = Ingredients { phi, w, pair, mu0, lambda_profile, n_lambda: limit_lambda(mode, b0, ell), omega };
    finish(&ing, dphi, pack, opts, c(0.0), t)
}

/// ‖A_N − A_∞‖_op + ‖B_N − B_∞‖_HS.
pub fn block_distance(a: &QuadraticGenerator, b: &QuadraticGenerator) -> f64 {
    linalg::op_norm(&(&a.a - &b.a)) + linalg::hs_norm(&(&a.b - &b.b))
}

/// θ(t) = −∫₀ᵗ η(τ)dτ on a uniform mesh: composite Simpson on even
/// sub-intervals, with a cubic end correction when the count is odd.
pub fn eta_integral(eta: &[f64], dt: f64) -> Result<Vec<f64>> {
    if eta.len() < 3 {
        return Err(Error::pre("phase integration needs at least three samples"));
    }
    let mut theta = vec![0.0; eta.len()];
    // first interval from the quadratic through the first three samples
    theta[1] = -dt / 12.0 * (5.0 * eta[0] + 8.0 * eta[1] - eta[2]);
    for i in 2..eta.len() {
        theta[i] = theta[i - 2] - dt / 3.0 * (eta[i - 2] + 4.0 * eta[i - 1] + eta[i]);
    }
    Ok(theta)
}
