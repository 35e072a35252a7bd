//! Truncated bosonic Fock spaces over a handful of modes: occupation
//! basis, sparse second-quantized operators, Krylov propagation, the
//! excitation map U_φ and Bogoliubov unitaries.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{read_f64, read_u32, Field};
use crate::linalg::{self, c, CMat};
use crate::quadgen::{self, QuadraticGenerator};

/// Cap on the number of basis states.
pub const MAX_DIM: usize = 2_000_000;

/// Occupation-number basis with n_min ≤ Σn ≤ n_max, graded lexicographic.
#[derive(Clone, Debug, PartialEq)]
pub struct FockBasis {
    pub modes: usize,
    pub n_min: usize,
    pub n_max: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    sector_start: Vec<usize>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn compositions(modes: usize, total: usize, out: &mut Vec<Vec<u8>>) {
    // lexicographically decreasing in the first slot, as a stable order
    fn rec(prefix: &mut Vec<u8>, left: usize, modes: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == modes {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k as u8);
            rec(prefix, left - k, modes, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(modes), total, modes, out);
}

impl FockBasis {
    /// All states with total occupation ≤ n_max.
    pub fn new(modes: usize, n_max: usize) -> Result<Self> {
        Self::range(modes, 0, n_max)
    }

    /// The sector with exactly n particles.
    pub fn sector(modes: usize, n: usize) -> Result<Self> {
        Self::range(modes, n, n)
    }

    pub fn range(modes: usize, n_min: usize, n_max: usize) -> Result<Self> {
        if modes == 0 || n_min > n_max || n_max > 255 {
            return Err(Error::pre("Fock basis needs at least one mode and n_min ≤ n_max ≤ 255"));
        }
        let dim: f64 = (n_min..=n_max).map(|n| binomial(n + modes - 1, n)).sum();
        if dim > MAX_DIM as f64 {
            return Err(Error::config(format!("Fock dimension {dim} exceeds the cap {MAX_DIM}")));
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut sector_start = Vec::new();
        for n in n_min..=n_max {
            sector_start.push(states.len());
            compositions(modes, n, &mut states);
        }
        sector_start.push(states.len());
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockBasis { modes, n_min, n_max, states, index, sector_start })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn find(&self, s: &[u8]) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn total(&self, i: usize) -> usize {
        self.states[i].iter().map(|&v| v as usize).sum()
    }

    /// Index range of the sector with n particles.
    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        if n < self.n_min || n > self.n_max {
            return 0..0;
        }
        let k = n - self.n_min;
        self.sector_start[k]..self.sector_start[k + 1]
    }

    pub fn vacuum(&self) -> Result<Vec<C64>> {
        let i = self.find(&vec![0; self.modes]).ok_or_else(|| Error::pre("basis has no vacuum"))?;
        let mut v = vec![c(0.0); self.dim()];
        v[i] = c(1.0);
        Ok(v)
    }

    /// Values of g(total occupation) on the basis.
    pub fn number_function(&self, g: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.dim()).map(|i| g(self.total(i))).collect()
    }

    /// Basis dump "CFBS": u32 version, u32 modes, u32 n_min, u32 n_max,
    /// u32 dim, then the occupation tuples as bytes.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"CFBS")?;
        for v in [1, self.modes, self.n_min, self.n_max, self.dim()] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for s in &self.states {
            w.write_all(s)?;
        }
        Ok(())
    }

    pub fn read_dump(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CFBS" || read_u32(r)? != 1 {
            return Err(Error::Format("bad Fock basis header".into()));
        }
        let modes = read_u32(r)? as usize;
        let n_min = read_u32(r)? as usize;
        let n_max = read_u32(r)? as usize;
        let dim = read_u32(r)? as usize;
        let basis = Self::range(modes, n_min, n_max)?;
        if basis.dim() != dim {
            return Err(Error::Format("basis dimension mismatch".into()));
        }
        let mut buf = vec![0u8; modes];
        for s in &basis.states {
            r.read_exact(&mut buf)?;
            if &buf != s {
                return Err(Error::Format("basis enumeration differs from the dump".into()));
            }
        }
        Ok(basis)
    }
}

/// Oracle state dump "CFST": basis dump followed by the coefficients.
pub fn write_state(w: &mut impl Write, basis: &FockBasis, v: &[C64]) -> Result<()> {
    basis.write_dump(w)?;
    for z in v {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state(r: &mut impl Read) -> Result<(FockBasis, Vec<C64>)> {
    let basis = FockBasis::read_dump(r)?;
    let mut v = Vec::with_capacity(basis.dim());
    for _ in 0..basis.dim() {
        v.push(C64::new(read_f64(r)?, read_f64(r)?));
    }
    Ok((basis, v))
}

/// Compressed-row sparse complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Sparse {
    pub rows: usize,
    pub cols: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<C64>,
}

impl Sparse {
    /// Duplicates are summed; exact zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col = Vec::with_capacity(t.len());
        let mut val: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, cc, v) in t {
            if last == Some((r, cc)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(cc);
                val.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, cc));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut s = Sparse { rows, cols, row_ptr, col, val };
        s.prune();
        s
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col = Vec::with_capacity(self.col.len());
        let mut val = Vec::with_capacity(self.val.len());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.val[k] != c(0.0) {
                    col.push(self.col[k]);
                    val.push(self.val[k]);
                }
            }
            row_ptr[r + 1] = col.len();
        }
        self.row_ptr = row_ptr;
        self.col = col;
        self.val = val;
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Sparse { rows, cols, row_ptr: vec![0; rows + 1], col: vec![], val: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_triplets(n, n, d.iter().enumerate().map(|(i, &v)| (i, i, c(v))).collect())
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r, self.col[k], self.val[k]));
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.val[k] * v[self.col[k]]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Sparse {
        let t = self.triplets().into_iter().map(|(r, cc, v)| (cc, r, v.conj())).collect();
        Sparse::from_triplets(self.cols, self.rows, t)
    }

    pub fn scale(&self, s: C64) -> Sparse {
        let mut out = self.clone();
        out.val.iter_mut().for_each(|v| *v *= s);
        out.prune();
        out
    }

    pub fn add(&self, other: &Sparse) -> Result<Sparse> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::pre("sparse shape mismatch"));
        }
        let mut t = self.triplets();
        t.extend(other.triplets());
        Ok(Sparse::from_triplets(self.rows, self.cols, t))
    }

    pub fn sub(&self, other: &Sparse) -> Result<Sparse> {
        self.add(&other.scale(c(-1.0)))
    }

    pub fn mul(&self, other: &Sparse) -> Result<Sparse> {
        if self.cols != other.rows {
            return Err(Error::pre("sparse product shape mismatch"));
        }
        let mut t = Vec::new();
        let mut acc = vec![c(0.0); other.cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (m, a) = (self.col[k], self.val[k]);
                for q in other.row_ptr[m]..other.row_ptr[m + 1] {
                    let j = other.col[q];
                    if acc[j] == c(0.0) {
                        touched.push(j);
                    }
                    acc[j] += a * other.val[q];
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &j in &touched {
                t.push((r, j, acc[j]));
                acc[j] = c(0.0);
            }
            touched.clear();
        }
        Ok(Sparse::from_triplets(self.rows, other.cols, t))
    }

    /// self · diag(d).
    pub fn mul_diag(&self, d: &[f64]) -> Sparse {
        let mut out = self.clone();
        for k in 0..out.val.len() {
            out.val[k] *= d[out.col[k]];
        }
        out.prune();
        out
    }

    /// diag(d) · self.
    pub fn diag_mul(&self, d: &[f64]) -> Sparse {
        let mut out = self.clone();
        for r in 0..out.rows {
            for k in out.row_ptr[r]..out.row_ptr[r + 1] {
                out.val[k] *= d[r];
            }
        }
        out.prune();
        out
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (r, cc, v) in self.triplets() {
            m[(r, cc)] += v;
        }
        m
    }

    pub fn from_dense(m: &CMat, drop_below: f64) -> Sparse {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for cc in 0..m.ncols() {
                if m[(r, cc)].norm() > drop_below {
                    t.push((r, cc, m[(r, cc)]));
                }
            }
        }
        Sparse::from_triplets(m.nrows(), m.ncols(), t)
    }

    /// max |S − S†| entry.
    pub fn hermiticity_defect(&self) -> f64 {
        match self.sub(&self.adjoint()) {
            Ok(d) => d.val.iter().map(|v| v.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ladder {
    Create,
    Annihilate,
}

/// Applies a monomial (rightmost first) to an occupation state.
fn apply(state: &[u8], ops: &[(Ladder, usize)]) -> Option<(Vec<u8>, f64)> {
    let mut s = state.to_vec();
    let mut amp = 1.0;
    for &(kind, i) in ops.iter().rev() {
        match kind {
            Ladder::Annihilate => {
                if s[i] == 0 {
                    return None;
                }
                amp *= (s[i] as f64).sqrt();
                s[i] -= 1;
            }
            Ladder::Create => {
                if s[i] == 255 {
                    return None;
                }
                s[i] += 1;
                amp *= (s[i] as f64).sqrt();
            }
        }
    }
    Some((s, amp))
}

/// Operator Σ_terms coef · monomial on a basis; components leaving the
/// basis (truncation) are dropped.
fn build(basis: &FockBasis, terms: &[(C64, Vec<(Ladder, usize)>)]) -> Sparse {
    let mut t = Vec::new();
    for j in 0..basis.dim() {
        let s = basis.state(j);
        for (coef, ops) in terms {
            if *coef == c(0.0) {
                continue;
            }
            if let Some((out, amp)) = apply(s, ops) {
                if let Some(i) = basis.find(&out) {
                    t.push((i, j, coef * amp));
                }
            }
        }
    }
    Sparse::from_triplets(basis.dim(), basis.dim(), t)
}

use Ladder::{Annihilate as An, Create as Cr};

pub fn annihilator(basis: &FockBasis, i: usize) -> Sparse {
    build(basis, &[(c(1.0), vec![(An, i)])])
}

pub fn creator(basis: &FockBasis, i: usize) -> Sparse {
    build(basis, &[(c(1.0), vec![(Cr, i)])])
}

/// a(f) = Σ f̄_i a_i.
pub fn annihilate_fn(basis: &FockBasis, f: &[C64]) -> Sparse {
    let terms: Vec<_> = f.iter().enumerate().map(|(i, z)| (z.conj(), vec![(An, i)])).collect();
    build(basis, &terms)
}

/// a*(f) = Σ f_i a*_i.
pub fn create_fn(basis: &FockBasis, f: &[C64]) -> Sparse {
    let terms: Vec<_> = f.iter().enumerate().map(|(i, z)| (*z, vec![(Cr, i)])).collect();
    build(basis, &terms)
}

fn check_modes(basis: &FockBasis, n: usize) -> Result<()> {
    if basis.modes != n {
        return Err(Error::pre(format!("one-particle dimension {n} differs from {} modes", basis.modes)));
    }
    Ok(())
}

/// dΓ(A) = Σ A_ij a*_i a_j.
pub fn dgamma(basis: &FockBasis, a: &CMat) -> Result<Sparse> {
    check_modes(basis, a.nrows())?;
    let mut terms = Vec::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            terms.push((a[(i, j)], vec![(Cr, i), (An, j)]));
        }
    }
    Ok(build(basis, &terms))
}

pub fn number_operator(basis: &FockBasis) -> Sparse {
    Sparse::diag(&basis.number_function(|n| n as f64))
}

/// Σ B_ij a*_i a*_j.
pub fn pair_creation(basis: &FockBasis, b: &CMat) -> Result<Sparse> {
    check_modes(basis, b.nrows())?;
    let mut terms = Vec::new();
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            terms.push((b[(i, j)], vec![(Cr, i), (Cr, j)]));
        }
    }
    Ok(build(basis, &terms))
}

/// Σ W_ijkl a*_i a*_j a_k a_l, W indexed as w(i, j, k, l).
pub fn quartic(basis: &FockBasis, w: impl Fn(usize, usize, usize, usize) -> C64) -> Sparse {
    let m = basis.modes;
    let mut terms = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    terms.push((w(i, j, k, l), vec![(Cr, i), (Cr, j), (An, k), (An, l)]));
                }
            }
        }
    }
    build(basis, &terms)
}

/// Σ T_ijk a*_i a*_j a_k.
pub fn cubic(basis: &FockBasis, t: impl Fn(usize, usize, usize) -> C64) -> Sparse {
    let m = basis.modes;
    let mut terms = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                terms.push((t(i, j, k), vec![(Cr, i), (Cr, j), (An, k)]));
            }
        }
    }
    build(basis, &terms)
}

/// Σ A a*a + ½Σ(B a*a* + B̄ aa) + c.
pub fn build_quadratic_operator(gen: &QuadraticGenerator, basis: &FockBasis) -> Result<Sparse> {
    check_modes(basis, gen.dim())?;
    let half_b = pair_creation(basis, &(&gen.b * c(0.5)))?;
    let op = dgamma(basis, &gen.a)?.add(&half_b)?.add(&half_b.adjoint())?;
    op.add(&Sparse::identity(basis.dim()).scale(gen.c))
}

/// e^{−iHt}v for hermitian H by restarted Lanczos with step halving so
/// that the a-posteriori error per unit time stays below `tol`.
pub fn expmv(h: &Sparse, v: &[C64], t: f64, tol: f64) -> Result<Vec<C64>> {
    let n = v.len();
    if h.rows != n || h.cols != n {
        return Err(Error::pre("propagator shape mismatch"));
    }
    let mut w = v.to_vec();
    let mut done = 0.0;
    let total = t.abs();
    let sign = t.signum();
    let m_max = 40.min(n.max(1));
    let mut step = total;
    let mut guard = 0usize;
    while done < total {
        guard += 1;
        if guard > 1_000_000 {
            return Err(Error::numerical("fock", "Krylov propagation did not finish"));
        }
        let beta0 = norm(&w);
        if beta0 == 0.0 {
            return Ok(w);
        }
        let mut basis_v: Vec<Vec<C64>> = vec![w.iter().map(|z| z / beta0).collect()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut breakdown = false;
        for j in 0..m_max {
            let mut u = h.matvec(&basis_v[j]);
            let a = dot(&basis_v[j], &u).re;
            alpha.push(a);
            axpy(&mut u, -a, &basis_v[j]);
            if j > 0 {
                axpy(&mut u, -beta[j - 1], &basis_v[j - 1]);
            }
            // full reorthogonalization keeps the small problem faithful
            for q in &basis_v {
                let p = dot(q, &u);
                for (x, y) in u.iter_mut().zip(q) {
                    *x -= p * y;
                }
            }
            let b = norm(&u);
            if b < 1e-13 * (1.0 + a.abs()) {
                breakdown = true;
                break;
            }
            beta.push(b);
            if j + 1 < m_max {
                basis_v.push(u.iter().map(|z| z / b).collect());
            }
        }
        let m = alpha.len();
        let mut tm = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            tm[(i, i)] = alpha[i];
            if i + 1 < m {
                tm[(i, i + 1)] = beta[i];
                tm[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(tm);
        let small = |s: f64| -> Vec<C64> {
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|k| {
                            let q = eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)];
                            C64::from_polar(q, -sign * s * eig.eigenvalues[k])
                        })
                        .sum()
                })
                .collect()
        };
        step = step.min(total - done);
        let mut y;
        loop {
            y = small(step);
            let err = if breakdown { 0.0 } else { beta0 * beta[m - 1] * y[m - 1].norm() };
            if err <= tol * step / total.max(1e-300) * beta0 || step < 1e-12 * total {
                break;
            }
            step /= 2.0;
        }
        let mut next = vec![c(0.0); n];
        for (k, q) in basis_v.iter().enumerate().take(m) {
            axpy_c(&mut next, y[k] * beta0, q);
        }
        w = next;
        done += step;
        if total - done < 1e-15 * total {
            break;
        }
        step *= 2.0;
    }
    Ok(w)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    dot(a, b)
}

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += v * a;
    }
}

fn axpy_c(y: &mut [C64], a: C64, x: &[C64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += v * a;
    }
}

pub fn distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Restriction of v to the sectors with at most m particles.
pub fn truncate_sectors(basis: &FockBasis, v: &[C64], m: usize) -> Vec<C64> {
    v.iter().enumerate().map(|(i, z)| if basis.total(i) <= m { *z } else { c(0.0) }).collect()
}

/// Re-expresses a vector of `from` in `to` (states missing from `to` are
/// dropped).
pub fn transfer(from: &FockBasis, v: &[C64], to: &FockBasis) -> Vec<C64> {
    let mut out = vec![c(0.0); to.dim()];
    for (i, z) in v.iter().enumerate() {
        if let Some(j) = to.find(from.state(i)) {
            out[j] = *z;
        }
    }
    out
}

fn unit_phi(phi: &[C64]) -> Result<()> {
    let nrm = norm(phi);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::pre(format!("‖φ‖ = {nrm} differs from 1")));
    }
    Ok(())
}

/// Γ(Q) for Q = 1 − |φ⟩⟨φ| on the n-sector: Σ_k (−1)^k/k! a*(φ)^k a(φ)^k.
fn gamma_q(a_phi: &Sparse, ad_phi: &Sparse, v: &[C64], n: usize) -> Vec<C64> {
    let mut out = v.to_vec();
    let mut lowered = v.to_vec();
    let mut fact = 1.0;
    for k in 1..=n {
        lowered = a_phi.matvec(&lowered);
        fact *= k as f64;
        let mut raised = lowered.clone();
        for _ in 0..k {
            raised = ad_phi.matvec(&raised);
        }
        let s = if k % 2 == 1 { -1.0 / fact } else { 1.0 / fact };
        axpy(&mut out, s, &raised);
    }
    out
}

/// U_φ ψ = ⊕_n Q^{⊗n} a(φ)^{N−n}/√((N−n)!) ψ for ψ in the N-particle
/// sector of `basis` (which must contain every sector ≤ N).
pub fn excitation_map(basis: &FockBasis, phi: &[C64], psi: &[C64], n_part: usize) -> Result<Vec<C64>> {
    unit_phi(phi)?;
    check_modes(basis, phi.len())?;
    if basis.n_min != 0 || basis.n_max < n_part {
        return Err(Error::pre("excitation map needs all sectors up to N"));
    }
    let a_phi = annihilate_fn(basis, phi);
    let ad_phi = create_fn(basis, phi);
    let mut out = vec![c(0.0); basis.dim()];
    let mut lowered = psi.to_vec();
    let mut fact = 1.0;
    for j in 0..=n_part {
        // lowered = a(φ)^j ψ, in sector N − j
        if j > 0 {
            lowered = a_phi.matvec(&lowered);
            fact *= j as f64;
        }
        let n = n_part - j;
        let piece = gamma_q(&a_phi, &ad_phi, &lowered, n);
        axpy(&mut out, 1.0 / fact.sqrt(), &piece);
    }
    Ok(out)
}

/// U*_φ Φ = Σ_n a*(φ)^{N−n}/√((N−n)!) Φ_n.
pub fn excitation_map_inverse(basis: &FockBasis, phi: &[C64], xi: &[C64], n_part: usize) -> Result<Vec<C64>> {
    unit_phi(phi)?;
    check_modes(basis, phi.len())?;
    if basis.n_min != 0 || basis.n_max < n_part {
        return Err(Error::pre("excitation map needs all sectors up to N"));
    }
    let ad_phi = create_fn(basis, phi);
    let mut out = vec![c(0.0); basis.dim()];
    for n in 0..=n_part {
        let mut piece: Vec<C64> = xi.iter().enumerate().map(|(i, z)| if basis.total(i) == n { *z } else { c(0.0) }).collect();
        let mut fact = 1.0;
        for j in 1..=(n_part - n) {
            piece = ad_phi.matvec(&piece);
            fact *= j as f64;
        }
        axpy(&mut out, 1.0 / fact.sqrt(), &piece);
    }
    Ok(out)
}

/// Anti-hermitian exponent X = ½Σ(k̄_ij a_i a_j − k_ij a*_i a*_j) of T.
pub fn bogoliubov_exponent(basis: &FockBasis, k: &CMat) -> Result<Sparse> {
    let cre = pair_creation(basis, &(k * c(0.5)))?;
    cre.adjoint().sub(&cre)
}

/// Dense T = e^X on the truncated space.
pub fn bogoliubov_unitary(basis: &FockBasis, k: &CMat) -> Result<CMat> {
    if basis.modes > 8 {
        return Err(Error::config("Bogoliubov unitaries are limited to 8 modes"));
    }
    let x = bogoliubov_exponent(basis, k)?;
    Ok(linalg::expm(&x.to_dense()))
}

/// T v (or T* v) by Krylov propagation of iX, with the weight that ends up
/// in the top two sectors returned as the leakage metric.
pub fn apply_bogoliubov(basis: &FockBasis, k: &CMat, v: &[C64], adjoint: bool, max_leak: f64) -> Result<(Vec<C64>, f64)> {
    let x = bogoliubov_exponent(basis, k)?;
    // e^{X t} = e^{−iHt} with H = iX
    let h = x.scale(C64::new(0.0, 1.0));
    let t = if adjoint { -1.0 } else { 1.0 };
    let out = expmv(&h, v, t, 1e-12)?;
    let top = basis.n_max.saturating_sub(1);
    let leak: f64 = out.iter().enumerate().filter(|(i, _)| basis.total(*i) >= top).map(|(_, z)| z.norm_sqr()).sum();
    let rel = leak / norm(v).powi(2).max(1e-300);
    if rel > max_leak {
        return Err(Error::numerical(
            "fock",
            format!("Bogoliubov truncation leakage {rel:.3e} exceeds {max_leak:.3e}"),
        ));
    }
    Ok((out, rel))
}

/// Hamiltonian dΓ(−Δ) + (1/2N)Σ V_ij a*_i a*_j a_j a_i on the sites of a
/// small grid, with V the cell-averaged pair potential field.
pub fn build_hn(basis: &FockBasis, v: &Field, n_part: usize) -> Result<Sparse> {
    let grid = v.grid;
    check_modes(basis, grid.n_sites())?;
    if n_part == 0 {
        return Err(Error::pre("particle number must be positive"));
    }
    let lap = quadgen::neg_laplacian_op(&grid);
    let vm = quadgen::displacement_matrix(v);
    let s = 1.0 / (2.0 * n_part as f64);
    let pot = quartic(basis, |i, j, k, l| if k == j && l == i { vm[(i, j)] * s } else { c(0.0) });
    dgamma(basis, &lap)?.add(&pot)
}

/// Ingredients of ℒ_{N,t} on a small grid.
pub struct LntInputs<'a> {
    pub phi: &'a Field,
    /// V_N sampled as a function of the displacement.
    pub v: &'a Field,
    /// V_N ω_N sampled the same way.
    pub v_omega: &'a Field,
    pub n_part: usize,
    pub number_order: NumberOrder,
}

/// Placement of 𝒩/N in the linear term a*(Q[V_N∗|φ|²]φ)𝒩/N. `Left`
/// (𝒩 a*(·)/N) is what U_φ H_N U_φ* + (i∂tU_φ)U_φ* produces; `Right` is
/// the order as usually displayed, which differs by
/// (1/N)[a*(Q[V_N∗|φ|²]φ)√(N−𝒩) + h.c.].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NumberOrder {
    #[default]
    Left,
    Right,
}

/// Fluctuation generator ℒ_{N,t} with exact sector dressings; acts on
/// the Fock space over all grid sites truncated at N particles.
pub fn build_lnt(basis: &FockBasis, inp: &LntInputs) -> Result<Sparse> {
    let grid = inp.phi.grid;
    check_modes(basis, grid.n_sites())?;
    let n = inp.n_part;
    if basis.n_min != 0 || basis.n_max > n {
        return Err(Error::pre("ℒ_{N,t} acts on sectors 0..=N only"));
    }
    let nf = n as f64;
    let dim = basis.dim();
    let m = grid.n_sites();
    let phi = inp.phi;
    let cf: Vec<C64> = phi.coeffs();
    let q = crate::bogokernel::projector(phi);
    let rho = phi.abs2();
    let conv = |f: &Field| -> Result<Vec<f64>> { Ok(f.convolve(&rho)?.data.iter().map(|z| z.re).collect()) };
    let w_v = conv(inp.v)?;
    let w_vo = conv(inp.v_omega)?;
    let w_vf: Vec<f64> = w_v.iter().zip(&w_vo).map(|(a, b)| a - b).collect();
    let inner = |w: &[f64]| -> f64 { cf.iter().zip(w).map(|(z, x)| z.norm_sqr() * x).sum() };
    let mu = inner(&w_vo);
    let vphi = inner(&w_v);
    // V_N(1 − 2f_N) = 2V_Nω_N − V_N
    let s1 = (nf + 1.0) / 2.0 * (2.0 * mu - vphi) - mu;

    let num = basis.number_function(|k| k as f64);
    let id = Sparse::identity(dim);
    let mut l = id.scale(c(s1));
    l = l.add(&Sparse::diag(&basis.number_function(|k| 0.5 * vphi * (k * (k + 1)) as f64 / nf)))?;

    // linear terms
    let apply_q = |w: &[f64]| -> Vec<C64> {
        let g: Vec<C64> = cf.iter().zip(w).map(|(z, x)| z * *x).collect();
        (0..m).map(|i| (0..m).map(|j| q[(i, j)] * g[j]).sum()).collect()
    };
    let f_omega = apply_q(&w_vo);
    let f_v = apply_q(&w_v);
    let sqrt_rest = basis.number_function(|k| ((nf - k as f64).max(0.0) / nf).sqrt());
    let frac_n: Vec<f64> = num.iter().map(|k| k / nf).collect();
    let dressed = match inp.number_order {
        NumberOrder::Left => create_fn(basis, &f_v).diag_mul(&frac_n),
        NumberOrder::Right => create_fn(basis, &f_v).mul_diag(&frac_n),
    };
    let lin = create_fn(basis, &f_omega)
        .sub(&dressed)?
        .mul_diag(&sqrt_rest)
        .scale(c(nf.sqrt()));
    l = l.add(&lin)?.add(&lin.adjoint())?;

    // one-body terms
    let pk = quadgen::build_k1_k2(phi, inp.v, true)?;
    let lap = quadgen::neg_laplacian_op(&grid);
    let one = &lap + linalg::diag_real(&w_vf) + &pk.k1 - linalg::identity(m) * c(mu);
    l = l.add(&dgamma(basis, &one)?)?;
    l = l.add(&dgamma(basis, &linalg::mm3(&q, &linalg::diag_real(&w_vo), &q))?)?;
    let second = linalg::mm3(&q, &linalg::diag_real(&w_v), &q) + &pk.k1;
    let frac = basis.number_function(|k| k as f64 / nf);
    l = l.sub(&dgamma(basis, &second)?.mul_diag(&frac))?;

    // pair term
    let pair_dress = basis.number_function(|k| {
        let r = nf - k as f64;
        (r * (r - 1.0)).max(0.0).sqrt() / nf
    });
    let pair = pair_creation(basis, &(&pk.k2 * c(0.5)))?.mul_diag(&pair_dress);
    l = l.add(&pair)?.add(&pair.adjoint())?;

    // cubic term Σ_{a,y'} Q_xa Q_yy' V_ay' φ(y') Q_ax'
    let vm = quadgen::displacement_matrix(inp.v);
    let mut qv = CMat::zeros(m, m); // (Q ⊗ ·) contracted with V φ on the second slot
    for a in 0..m {
        for y in 0..m {
            let s: C64 = (0..m).map(|yp| q[(y, yp)] * vm[(a, yp)] * cf[yp]).sum();
            qv[(a, y)] = s;
        }
    }
    let cub = cubic(basis, |x, y, xp| (0..m).map(|a| q[(x, a)] * qv[(a, y)] * q[(a, xp)]).sum::<C64>() / nf.sqrt())
        .mul_diag(&sqrt_rest);
    l = l.add(&cub)?.add(&cub.adjoint())?;

    // quartic term (Q⊗Q V Q⊗Q)_{(ij),(kl)} = Σ_ab Q_ia Q_jb V_ab Q_ak Q_bl
    let mut t3 = vec![c(0.0); m * m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for ll in 0..m {
                    let mut s = c(0.0);
                    for a in 0..m {
                        for b in 0..m {
                            s += q[(i, a)] * q[(j, b)] * vm[(a, b)] * q[(a, k)] * q[(b, ll)];
                        }
                    }
                    t3[((i * m + j) * m + k) * m + ll] = s / (2.0 * nf);
                }
            }
        }
    }
    l = l.add(&quartic(basis, |i, j, k, ll| t3[((i * m + j) * m + k) * m + ll]))?;
    Ok(l)
}

/// γ_ij = ⟨ψ, a*_j a_i ψ⟩ / ⟨ψ, 𝒩 ψ⟩.
pub fn reduced_density(basis: &FockBasis, psi: &[C64]) -> Result<CMat> {
    let m = basis.modes;
    let ann: Vec<Vec<C64>> = (0..m).map(|i| annihilator(basis, i).matvec(psi)).collect();
    let mut g = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = dot(&ann[j], &ann[i]);
        }
    }
    let tr = g.trace().re;
    if !(tr > 0.0) {
        return Err(Error::pre("state has no particles"));
    }
    Ok(g * c(1.0 / tr))
}

/// (1 − ⟨φ,γφ⟩, tr|γ − |φ⟩⟨φ||).
pub fn bec_metrics(gamma: &CMat, phi: &[C64]) -> (f64, f64) {
    let p = linalg::CVec::from_vec(phi.to_vec());
    let proj = &p * p.adjoint();
    let occ = (p.adjoint() * gamma * &p)[(0, 0)].re;
    (1.0 - occ, linalg::trace_norm_herm(&(gamma - proj)))
}
