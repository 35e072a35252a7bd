//! Bogoliubov flows of quadratic generators.
//!
//! A flow is stored as the pair (P, R) with 𝒰* a 𝒰 = P a + R a* (vector
//! notation over the mode basis), i.e. the block matrix Π = [[P, R], [R̄, P̄]]
//! acting on (a, a*). For a generator G(t) the Heisenberg equation reads
//! Π̇ = −i 𝒜'(t) Π with 𝒜' = [[A, B], [−B̄, −Ā]], and flows compose by
//! block multiplication Π(t₂;t₀) = Π(t₂;t₁)Π(t₁;t₀).
//!
//! In terms of a(f) = Σ f̄_i a_i this is a(f) ↦ a(U f) + a*(V f̄) with
//! U = P† and V = Rᵀ.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{read_f64, read_u32};
use crate::linalg::{self, c, CMat};
use crate::quadgen::{read_matrix, write_matrix, QuadraticGenerator};

pub const DEFAULT_TOL_SYMP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct BogoliubovPair {
    pub p: CMat,
    pub r: CMat,
}

impl BogoliubovPair {
    pub fn identity(n: usize) -> Self {
        BogoliubovPair { p: linalg::identity(n), r: CMat::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// Pair with P = ch and R = sh, the action of a Bogoliubov
    /// transformation built from a symmetric kernel.
    pub fn from_ch_sh(ch: &CMat, sh: &CMat) -> Self {
        BogoliubovPair { p: ch.clone(), r: sh.clone() }
    }

    /// U = P†.
    pub fn u(&self) -> CMat {
        self.p.adjoint()
    }

    /// V = Rᵀ.
    pub fn v(&self) -> CMat {
        self.r.transpose()
    }

    pub fn block(&self) -> CMat {
        let n = self.dim();
        let mut m = CMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.p);
        m.view_mut((0, n), (n, n)).copy_from(&self.r);
        m.view_mut((n, 0), (n, n)).copy_from(&linalg::conj(&self.r));
        m.view_mut((n, n), (n, n)).copy_from(&linalg::conj(&self.p));
        m
    }

    pub fn from_block(m: &CMat) -> Self {
        let n = m.nrows() / 2;
        BogoliubovPair { p: m.view((0, 0), (n, n)).into_owned(), r: m.view((0, n), (n, n)).into_owned() }
    }

    /// Symplectic defect: max of ‖U U† − V V† − 1‖ and ‖U Vᵀ − V Uᵀ‖ in
    /// Frobenius norm, together with the same relations for (P, R).
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.dim();
        let id = linalg::identity(n);
        let (u, v) = (self.u(), self.v());
        let d1 = linalg::hs_norm(&(linalg::mm(&u, &u.adjoint()) - linalg::mm(&v, &v.adjoint()) - &id));
        let d2 = linalg::hs_norm(&(linalg::mm(&u, &v.transpose()) - linalg::mm(&v, &u.transpose())));
        let d3 = linalg::hs_norm(&(linalg::mm(&self.p, &self.p.adjoint()) - linalg::mm(&self.r, &self.r.adjoint()) - &id));
        let d4 = linalg::hs_norm(&(linalg::mm(&self.p, &self.r.transpose()) - linalg::mm(&self.r, &self.p.transpose())));
        d1.max(d2).max(d3).max(d4)
    }

    /// Inverse flow from the symplectic relations.
    pub fn inverse(&self) -> Self {
        BogoliubovPair { p: self.p.adjoint(), r: -self.r.transpose() }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        linalg::hs_norm(&(&self.p - &other.p)) + linalg::hs_norm(&(&self.r - &other.r))
    }

    /// Flow checkpoint "CFLW": u32 version, u32 n, f64 t₀, f64 t₁, f64 dt,
    /// u64 generator hash, then P and R row-major.
    pub fn write_checkpoint(&self, w: &mut impl Write, meta: &FlowMeta) -> Result<()> {
        w.write_all(b"CFLW")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for v in [meta.t0, meta.t1, meta.dt] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&meta.generator_hash.to_le_bytes())?;
        write_matrix(w, &self.p)?;
        write_matrix(w, &self.r)
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<(Self, FlowMeta)> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CFLW" || read_u32(r)? != 1 {
            return Err(Error::Format("bad flow checkpoint header".into()));
        }
        let n = read_u32(r)? as usize;
        let t0 = read_f64(r)?;
        let t1 = read_f64(r)?;
        let dt = read_f64(r)?;
        let mut hb = [0u8; 8];
        r.read_exact(&mut hb)?;
        let p = read_matrix(r, n)?;
        let rr = read_matrix(r, n)?;
        Ok((BogoliubovPair { p, r: rr }, FlowMeta { t0, t1, dt, generator_hash: u64::from_le_bytes(hb) }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowMeta {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub generator_hash: u64,
}

/// Π(t₂;t₀) = Π(t₂;t₁)Π(t₁;t₀).
pub fn compose(later: &BogoliubovPair, earlier: &BogoliubovPair) -> Result<BogoliubovPair> {
    if later.dim() != earlier.dim() {
        return Err(Error::pre("flow dimension mismatch"));
    }
    Ok(BogoliubovPair {
        p: linalg::mm(&later.p, &earlier.p) + linalg::mm(&later.r, &linalg::conj(&earlier.r)),
        r: linalg::mm(&later.p, &earlier.r) + linalg::mm(&later.r, &linalg::conj(&earlier.p)),
    })
}

/// Exact flow of a time-independent generator over time t.
pub fn exact_flow(gen: &QuadraticGenerator, t: f64) -> BogoliubovPair {
    let m = gen.heisenberg_matrix() * C64::new(0.0, -t);
    BogoliubovPair::from_block(&linalg::expm(&m))
}

/// Second-order Magnus (exponential midpoint) integration of the flow from
/// t₀ to t₁. The step is shortened to divide the interval evenly.
pub fn evolve_flow(
    gen: &mut dyn FnMut(f64) -> Result<QuadraticGenerator>,
    n: usize,
    t0: f64,
    t1: f64,
    dt: f64,
    tol_symp: f64,
) -> Result<BogoliubovPair> {
    if !(dt > 0.0) {
        return Err(Error::pre("flow step must be positive"));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(BogoliubovPair::identity(n));
    }
    let steps = (span.abs() / dt).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut pair = BogoliubovPair::identity(n);
    for s in 0..steps {
        let tm = t0 + (s as f64 + 0.5) * h;
        let g = gen(tm)?;
        if g.dim() != n {
            return Err(Error::pre("generator dimension changed during the flow"));
        }
        let mi = C64::new(0.0, -h);
        let (p, r) = linalg::expm_doubled(&(&g.a * mi), &(&g.b * mi));
        pair = compose(&BogoliubovPair { p, r }, &pair)?;
    }
    let defect = pair.symplectic_defect();
    if !(defect <= 100.0 * tol_symp) {
        return Err(Error::numerical("propagate", format!("symplectic defect {defect:.3e} after the flow")));
    }
    Ok(pair)
}

/// Quasi-free data of 𝒰Ω for the vacuum Ω.
#[derive(Clone, Debug)]
pub struct QuasiFree {
    pub n_expect: f64,
    /// γ_ij = ⟨a*_j a_i⟩.
    pub gamma: CMat,
    /// α_ij = ⟨a_i a_j⟩.
    pub pairing: CMat,
}

pub fn quasifree_observables(pair: &BogoliubovPair) -> QuasiFree {
    QuasiFree {
        n_expect: linalg::hs_norm(&pair.r).powi(2),
        gamma: linalg::mm(&pair.r, &pair.r.adjoint()),
        pairing: linalg::mm(&pair.p, &pair.r.transpose()),
    }
}

/// Random flow for tests: exponential of a random quadratic generator.
pub fn random_pair(n: usize, scale: f64, seed: u64) -> BogoliubovPair {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rnd = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let a = CMat::from_fn(n, n, |_, _| rnd());
    let b = CMat::from_fn(n, n, |_, _| rnd());
    let g = QuadraticGenerator {
        a: (&a + a.adjoint()) * c(0.5 * scale),
        b: (&b + b.transpose()) * c(0.5 * scale),
        c: C64::new(0.0, 0.0),
        t: 0.0,
    };
    exact_flow(&g, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bogokernel::{cosh_sinh_ops, ChShMethod};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_gen(n: usize, seed: u64) -> QuadraticGenerator {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rnd = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let a = CMat::from_fn(n, n, |_, _| rnd());
        let b = CMat::from_fn(n, n, |_, _| rnd());
        QuadraticGenerator {
            a: (&a + a.adjoint()) * c(0.5),
            b: (&b + b.transpose()) * c(0.5),
            c: C64::new(0.0, 0.0),
            t: 0.0,
        }
    }

    #[test]
    fn free_flow_is_a_phase() {
        let a = linalg::diag_real(&[0.0, 1.0, 4.0, 9.0]);
        let g = QuadraticGenerator::new(a.clone(), CMat::zeros(4, 4), C64::new(0.0, 0.0), 0.0).unwrap();
        let pair = evolve_flow(&mut |_| Ok(g.clone()), 4, 0.0, 1.0, 1e-2, DEFAULT_TOL_SYMP).unwrap();
        let expect = linalg::diag(&[0.0, 1.0, 4.0, 9.0].map(|e: f64| C64::from_polar(1.0, -e)));
        assert!(linalg::hs_norm(&(&pair.p - expect)) < 1e-12);
        assert_eq!(linalg::max_abs(&pair.r), 0.0);
    }

    #[test]
    fn time_independent_flow_matches_dense_exponential() {
        let g = random_gen(6, 1);
        let pair = evolve_flow(&mut |_| Ok(g.clone()), 6, 0.0, 1.0, 1e-2, DEFAULT_TOL_SYMP).unwrap();
        assert!(pair.distance(&exact_flow(&g, 1.0)) < 1e-9);
        assert_eq!(evolve_flow(&mut |_| Ok(g.clone()), 6, 0.3, 0.3, 1e-2, 1e-8).unwrap(), BogoliubovPair::identity(6));
    }

    #[test]
    fn refinement_is_second_order() {
        let (g0, g1) = (random_gen(5, 2), random_gen(5, 3));
        let gen = move |t: f64| -> Result<QuadraticGenerator> {
            Ok(QuadraticGenerator {
                a: &g0.a + &g1.a * c((2.0 * t).sin()),
                b: &g0.b * c(t.cos()),
                c: C64::new(0.0, 0.0),
                t,
            })
        };
        let mut gen = gen;
        let reference = evolve_flow(&mut gen, 5, 0.0, 1.0, 1e-4, 1e-8).unwrap();
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&dt| evolve_flow(&mut gen, 5, 0.0, 1.0, dt, 1e-8).unwrap().distance(&reference))
            .collect();
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
        let back = evolve_flow(&mut gen, 5, 1.0, 0.0, 1e-2, 1e-8).unwrap();
        let fwd = evolve_flow(&mut gen, 5, 0.0, 1.0, 1e-2, 1e-8).unwrap();
        let id = compose(&back, &fwd).unwrap();
        assert!(id.distance(&BogoliubovPair::identity(5)) < 1e-7);
    }

    #[test]
    fn squeeze_observables() {
        let theta: f64 = 0.6;
        let pair = BogoliubovPair {
            p: CMat::from_element(1, 1, C64::new(theta.cosh(), 0.0)),
            r: CMat::from_element(1, 1, C64::new(theta.sinh(), 0.0)),
        };
        let q = quasifree_observables(&pair);
        assert!((q.n_expect - theta.sinh().powi(2)).abs() < 1e-14);
        let z = quasifree_observables(&BogoliubovPair::identity(3));
        assert_eq!(z.n_expect, 0.0);
        assert_eq!(linalg::max_abs(&z.gamma), 0.0);
        assert_eq!(linalg::max_abs(&z.pairing), 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let pair = random_pair(3, 0.4, 9);
        let meta = FlowMeta { t0: 0.0, t1: 0.5, dt: 1e-3, generator_hash: 0xdead_beef };
        let mut buf = vec![];
        pair.write_checkpoint(&mut buf, &meta).unwrap();
        let (back, m) = BogoliubovPair::read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back, pair);
        assert_eq!(m, meta);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(compose(&BogoliubovPair::identity(2), &BogoliubovPair::identity(3)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn group_properties(s1 in 0u64..500, s2 in 0u64..500, s3 in 0u64..500) {
            let (a, b, d) = (random_pair(4, 0.5, s1), random_pair(4, 0.5, s2), random_pair(4, 0.5, s3));
            prop_assert!(a.symplectic_defect() < 1e-10);
            let id = compose(&a.inverse(), &a).unwrap();
            prop_assert!(id.distance(&BogoliubovPair::identity(4)) < 1e-9);
            prop_assert!(compose(&BogoliubovPair::identity(4), &a).unwrap().distance(&a) < 1e-14);
            let l = compose(&compose(&a, &b).unwrap(), &d).unwrap();
            let r = compose(&a, &compose(&b, &d).unwrap()).unwrap();
            prop_assert!(l.distance(&r) < 1e-9);
        }

        #[test]
        fn trace_gamma_is_excitation_number(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = CMat::from_fn(4, 4, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let k = (&k + k.transpose()) * c(0.3);
            let (ch, sh) = cosh_sinh_ops(&k, ChShMethod::Spectral).unwrap();
            let q = quasifree_observables(&BogoliubovPair::from_ch_sh(&ch, &sh));
            prop_assert!((q.gamma.trace().re - q.n_expect).abs() < 1e-10);
            let (vals, _) = linalg::herm_eigen(&q.gamma);
            prop_assert!(vals[0] > -1e-12);
            prop_assert!(linalg::hs_norm(&(&q.pairing - q.pairing.transpose())) < 1e-10);
        }

        #[test]
        fn no_pairing_never_populates_r(seed in 0u64..500) {
            let g = random_gen(4, seed);
            let g = QuadraticGenerator { b: CMat::zeros(4, 4), ..g };
            let pair = evolve_flow(&mut |_| Ok(g.clone()), 4, 0.0, 1.0, 0.05, 1e-8).unwrap();
            prop_assert!(linalg::max_abs(&pair.r) <= 1e-12);
        }
    }
}
