//! Dense complex linear algebra shared by the kernel, generator and flow
//! modules.
//!
//! Matrices are `nalgebra::DMatrix<C64>` (column-major). Products go through
//! `matrixmultiply::zgemm`, which is considerably faster than the generic
//! nalgebra path for complex entries.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `a * b`
pub fn mm(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matrix product shape mismatch");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    // column-major: element (i, j) at i + j * nrows
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// `a * b * c`
pub fn mm3(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    mm(&mm(a, b), c)
}

pub fn adj(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag(v: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(v))
}

pub fn diag_real(v: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(v.len(), v.iter().map(|&x| c(x))))
}

/// Frobenius norm (the Hilbert-Schmidt norm of an operator matrix in an
/// orthonormal basis).
pub fn hs_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a hermitian matrix: ascending eigenvalues and
/// the unitary of eigenvectors (columns).
pub fn herm_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let h = (a + a.adjoint()) * c(0.5);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(a.nrows(), idx.len(), |r, k| eig.eigenvectors[(r, idx[k])]);
    (vals, vecs)
}

/// `f(a)` for hermitian `a` through its spectral decomposition.
pub fn herm_fn(a: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, vecs) = herm_eigen(a);
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fl = f(l);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= fl);
    }
    mm(&scaled, &vecs.adjoint())
}

/// Operator (spectral) norm.
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let g = mm(&a.adjoint(), a);
    let (vals, _) = herm_eigen(&g);
    vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Trace norm of a hermitian matrix.
pub fn trace_norm_herm(a: &CMat) -> f64 {
    herm_eigen(a).0.iter().map(|l| l.abs()).sum()
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants (degree chosen from the 1-norm, Higham 2005).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let id = identity(n);
    if norm <= 1.0 {
        return taylor(a, norm, &id);
    }
    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs, &id);
        }
    }
    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let scaled = a * c(0.5f64.powi(s));
    let mut r = pade13(&scaled, &id);
    for _ in 0..s {
        r = mm(&r, &r);
    }
    r
}

// smallest degree with remainder bound norm^(m+1)/(m+1)! e^norm below 1e-17
fn taylor_degree(norm: f64) -> usize {
    let mut m = 1usize;
    let mut term = norm;
    while term * norm / (m + 1) as f64 * norm.exp() > 1e-17 && m < 30 {
        m += 1;
        term *= norm / m as f64;
    }
    m
}

fn factorials(m: usize) -> Vec<f64> {
    let mut fact = vec![1.0f64; m + 1];
    for k in 1..=m {
        fact[k] = fact[k - 1] * k as f64;
    }
    fact
}

/// Truncated Taylor series for small 1-norm, evaluated by
/// Paterson-Stockmeyer so that no linear solve is needed.
fn taylor(a: &CMat, norm: f64, id: &CMat) -> CMat {
    let m = taylor_degree(norm);
    let s = ((m as f64).sqrt().ceil() as usize).max(1);
    let mut powers = vec![id.clone(), a.clone()];
    while powers.len() <= s {
        let next = mm(powers.last().unwrap(), a);
        powers.push(next);
    }
    let fact = factorials(m);
    let blocks = m / s;
    let block = |j: usize| {
        let mut b = CMat::zeros(a.nrows(), a.ncols());
        for i in 0..s {
            let k = j * s + i;
            if k <= m {
                b += &powers[i] * c(1.0 / fact[k]);
            }
        }
        b
    };
    let mut r = block(blocks);
    for j in (0..blocks).rev() {
        r = mm(&r, &powers[s]) + block(j);
    }
    r
}

fn solve_pade(u: CMat, v: CMat) -> CMat {
    let p = &v + &u;
    let q = &v - &u;
    q.lu().solve(&p).expect("singular Padé denominator")
}

fn pade_low(a: &CMat, b: &[f64], id: &CMat) -> CMat {
    let a2 = mm(a, a);
    let mut powers = vec![id.clone(), a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = mm(powers.last().unwrap(), &a2);
        powers.push(next);
    }
    let mut uo = CMat::zeros(a.nrows(), a.ncols());
    let mut v = CMat::zeros(a.nrows(), a.ncols());
    for (k, p) in powers.iter().enumerate() {
        uo += p * c(b[2 * k + 1]);
        v += p * c(b[2 * k]);
    }
    let u = mm(a, &uo);
    solve_pade(u, v)
}

fn pade13(a: &CMat, id: &CMat) -> CMat {
    let b = &PADE13;
    let a2 = mm(a, a);
    let a4 = mm(&a2, &a2);
    let a6 = mm(&a4, &a2);
    let inner_u = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let u = mm(
        a,
        &(mm(&a6, &inner_u) + &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + id * c(b[1])),
    );
    let inner_v = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let v = mm(&a6, &inner_v) + &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + id * c(b[0]);
    solve_pade(u, v)
}

/// Product of two matrices of the doubled form [[p, r], [r̄, p̄]],
/// returned as its top blocks.
pub fn doubled_mul(x: (&CMat, &CMat), y: (&CMat, &CMat)) -> (CMat, CMat) {
    (
        mm(x.0, y.0) + mm(x.1, &conj(y.1)),
        mm(x.0, y.1) + mm(x.1, &conj(y.0)),
    )
}

/// Exponential of [[α, β], [β̄, ᾱ]] as the top blocks of the result. The
/// doubled form is closed under products, so the Taylor branch never
/// forms the 2n matrix.
pub fn expm_doubled(alpha: &CMat, beta: &CMat) -> (CMat, CMat) {
    let n = alpha.nrows();
    let norm = one_norm(&(alpha.map(|z| C64::new(z.norm(), 0.0)) + beta.map(|z| C64::new(z.norm(), 0.0))));
    if norm > 1.0 {
        let mut big = CMat::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(alpha);
        big.view_mut((0, n), (n, n)).copy_from(beta);
        big.view_mut((n, 0), (n, n)).copy_from(&conj(beta));
        big.view_mut((n, n), (n, n)).copy_from(&conj(alpha));
        let e = expm(&big);
        return (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, n)).into_owned());
    }
    let m = taylor_degree(norm);
    let s = ((m as f64).sqrt().ceil() as usize).max(1);
    let mut powers = vec![(identity(n), CMat::zeros(n, n)), (alpha.clone(), beta.clone())];
    while powers.len() <= s {
        let last = powers.last().unwrap();
        let next = doubled_mul((&last.0, &last.1), (alpha, beta));
        powers.push(next);
    }
    let fact = factorials(m);
    let block = |j: usize| {
        let mut b = (CMat::zeros(n, n), CMat::zeros(n, n));
        for i in 0..s {
            let k = j * s + i;
            if k <= m {
                b.0 += &powers[i].0 * c(1.0 / fact[k]);
                b.1 += &powers[i].1 * c(1.0 / fact[k]);
            }
        }
        b
    };
    let blocks = m / s;
    let mut r = block(blocks);
    for j in (0..blocks).rev() {
        let prod = doubled_mul((&r.0, &r.1), (&powers[s].0, &powers[s].1));
        let b = block(j);
        r = (prod.0 + b.0, prod.1 + b.1);
    }
    r
}

/// Fréchet derivative of the exponential at `a` in direction `e`, returned
/// together with `exp(a)`; read off the block-triangular exponential.
pub fn expm_frechet(a: &CMat, e: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let mut big = CMat::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((n, n), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).copy_from(e);
    let x = expm(&big);
    (x.view((0, 0), (n, n)).into_owned(), x.view((0, n), (n, n)).into_owned())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, scale: f64, seed: u64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
    }

    #[test]
    fn zgemm_matches_naive_product() {
        let a = random(7, 1.0, 1);
        let b = CMat::from_fn(7, 3, |i, j| C64::new(i as f64, -(j as f64)));
        let diff = mm(&a, &b) - &a * &b;
        assert!(hs_norm(&diff) < 1e-12);
    }

    #[test]
    fn expm_matches_taylor_for_every_pade_branch() {
        for (k, scale) in [0.001, 0.03, 0.15, 0.4, 1.5].iter().enumerate() {
            let a = random(6, *scale, 10 + k as u64);
            let mut term = identity(6);
            let mut sum = identity(6);
            for j in 1..60 {
                term = &term * &a * c(1.0 / j as f64);
                sum += &term;
            }
            let err = hs_norm(&(expm(&a) - sum));
            assert!(err < 1e-12, "scale {scale}: {err}");
        }
    }

    #[test]
    fn expm_of_antihermitian_is_unitary() {
        let h = random(10, 1.0, 3);
        let h = (&h + h.adjoint()) * c(0.5);
        let u = expm(&(h * C64::new(0.0, -2.0)));
        assert!(hs_norm(&(mm(&u, &u.adjoint()) - identity(10))) < 1e-12);
    }

    #[test]
    fn frechet_matches_finite_difference() {
        let a = random(5, 0.5, 4);
        let e = random(5, 1.0, 5);
        let (_, d) = expm_frechet(&a, &e);
        let h = 1e-5;
        let fd = (expm(&(&a + &e * c(h))) - expm(&(&a - &e * c(h)))) * c(0.5 / h);
        assert!(hs_norm(&(d - fd)) < 1e-8);
    }

    #[test]
    fn op_norm_of_diagonal() {
        let d = diag_real(&[1.0, -3.0, 2.0]);
        assert!((op_norm(&d) - 3.0).abs() < 1e-12);
        assert!((trace_norm_herm(&d) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn doubled_exponential_matches_full() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        for scale in [0.01, 0.1, 0.4] {
            let mut rnd = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
            let al = CMat::from_fn(n, n, |_, _| rnd());
            let be = CMat::from_fn(n, n, |_, _| rnd());
            let mut big = CMat::zeros(2 * n, 2 * n);
            big.view_mut((0, 0), (n, n)).copy_from(&al);
            big.view_mut((0, n), (n, n)).copy_from(&be);
            big.view_mut((n, 0), (n, n)).copy_from(&conj(&be));
            big.view_mut((n, n), (n, n)).copy_from(&conj(&al));
            let full = expm(&big);
            let (p, r) = expm_doubled(&al, &be);
            assert!(hs_norm(&(p - full.view((0, 0), (n, n)))) < 1e-13);
            assert!(hs_norm(&(r - full.view((0, n), (n, n)))) < 1e-13);
        }
    }

    #[test]
    fn taylor_and_pade_branches_agree() {
        let a = CMat::from_fn(5, 5, |i, j| C64::new(0.19 * ((i * 3 + j) % 4) as f64 - 0.3, 0.1 * i as f64));
        let small = expm(&a);
        let halved = expm(&(&a * c(4.0)));
        let sq = mm(&mm(&small, &small), &mm(&small, &small));
        assert!(hs_norm(&(sq - halved)) < 1e-12);
    }
}
