//! Exact few-body oracle on a small 1D lattice: N bosons evolved by H_N in
//! a truncated Fock space, compared with the Bogoliubov-dressed quadratic
//! fluctuation dynamics.
//!
//! This is a scaled-down analog of the continuum setting: one dimension,
//! a handful of lattice sites, N between 2 and 8, and V_N(x) = N^β V(N^β x).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bogokernel::{self, Profile};
use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, Sparse};
use crate::grid::{Field, Grid};
use crate::hartree::{self, HartreeConfig};
use crate::linalg::{c, CMat};
use crate::quadgen::{self, AssemblyOptions};
use crate::scattering::{self, Mode, PotentialSpec, ScatteringSolution};

/// Fluctuation vector ξ_N on F_⊥φ₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum XiSpec {
    Vacuum,
    /// Normalized Ω + ε a*(g)²Ω/√2 with g the φ₀-orthogonal part of the
    /// first site.
    Pair { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub m_modes: usize,
    pub box_side: f64,
    pub n: usize,
    pub beta: f64,
    pub v0: f64,
    pub r_support: f64,
    pub ell: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Particle cutoff of the excitation Fock spaces.
    pub n_max: usize,
    pub mesh_points: usize,
    /// Initial condensate: periodic Gaussian of this width and momentum.
    pub phi_width: f64,
    pub phi_momentum: f64,
    pub xi: XiSpec,
    /// Largest tolerated weight in the top two sectors after T or T*.
    pub max_leak: f64,
    pub krylov_tol: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            m_modes: 5,
            box_side: 10.0,
            n: 4,
            beta: 0.5,
            v0: 2.0,
            r_support: 1.0,
            ell: 2.4,
            t_final: 0.5,
            dt: 0.01,
            n_max: 8,
            mesh_points: 4000,
            phi_width: 2.5,
            phi_momentum: 0.6,
            xi: XiSpec::Vacuum,
            max_leak: 1e-4,
            krylov_tol: 1e-12,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("{field}: {msg}")));
        if !(2..=8).contains(&self.m_modes) {
            return bad("m_modes", format!("{} not in 2..=8", self.m_modes));
        }
        if !(1..=8).contains(&self.n) {
            return bad("n", format!("{} not in 1..=8", self.n));
        }
        if self.n_max < self.n {
            return bad("n_max", format!("{} below n = {}", self.n_max, self.n));
        }
        if !(self.ell > 0.0 && self.ell < self.box_side / 4.0) {
            return bad("ell", format!("{} must lie in (0, box_side/4)", self.ell));
        }
        if !(self.dt > 0.0 && self.t_final >= 0.0) {
            return bad("dt", "time step must be positive and t_final non-negative".into());
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return bad("dt", format!("t_final = {} is not a multiple of dt = {}", self.t_final, self.dt));
        }
        if !(self.phi_width > 0.0) {
            return bad("phi_width", "must be positive".into());
        }
        let dim = |n: usize| fock::FockBasis::new(self.m_modes, n).map(|b| b.dim());
        dim(self.n_max)?;
        dim(self.n)?;
        self.potential().validate()
    }

    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec {
            v0: self.v0,
            r_support: self.r_support,
            beta: self.beta,
            n_particles: self.n as f64,
            mode: Mode::Interval1,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Everything derived from a configuration.
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub grid: Grid,
    pub pot: PotentialSpec,
    pub scat: ScatteringSolution,
    pub b0: f64,
    /// V_N and V_N ω_N as functions of the displacement.
    pub v: Field,
    pub v_omega: Field,
    pub omega: Profile,
    pub hartree: HartreeConfig,
    pub nls: HartreeConfig,
    pub phi0: Field,
    /// Sectors 0..=N, for Ψ_N and U_φΨ_N.
    pub basis_n: FockBasis,
    /// Sectors 0..=n_max, for the excitation dynamics.
    pub basis_x: FockBasis,
    pub h_n: Sparse,
}

impl Scenario {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = Grid::small_lattice(cfg.m_modes, cfg.box_side)?;
        let pot = cfg.potential();
        let scat = scattering::solve_neumann(&pot, cfg.ell, cfg.mesh_points)?;
        let v = pot.sample_on_grid(&grid, |_| 1.0);
        let v_omega = pot.sample_on_grid(&grid, |r| scat.omega_at(r));
        let hartree = HartreeConfig::modified(grid, &pot, Some(&scat), cfg.dt)?;
        let b0 = pot.b0();
        let nls = HartreeConfig::contact(grid, b0, cfg.dt)?;
        let phi0 = hartree::gaussian_bump(grid, [0.5 * cfg.box_side, 0.0, 0.0], cfg.phi_width, cfg.phi_momentum);
        let basis_n = FockBasis::new(cfg.m_modes, cfg.n)?;
        let basis_x = FockBasis::new(cfg.m_modes, cfg.n_max)?;
        let h_n = fock::build_hn(&basis_n, &v, cfg.n)?;
        Ok(Scenario {
            cfg: cfg.clone(),
            grid,
            pot,
            omega: Profile::from_scattering(&scat),
            scat,
            b0,
            v,
            v_omega,
            hartree,
            nls,
            phi0,
            basis_n,
            basis_x,
            h_n,
        })
    }

    /// k_{N,t} as an operator matrix.
    pub fn kernel(&self, phi: &Field) -> Result<CMat> {
        Ok(bogokernel::build_k(&self.omega, phi, true)?.0.op)
    }

    pub fn lnt(&self, phi: &Field, order: fock::NumberOrder) -> Result<Sparse> {
        fock::build_lnt(
            &self.basis_n,
            &fock::LntInputs { phi, v: &self.v, v_omega: &self.v_omega, n_part: self.cfg.n, number_order: order },
        )
    }

    /// ξ_N on basis_x.
    pub fn xi(&self) -> Result<Vec<C64>> {
        let b = &self.basis_x;
        let vac = b.vacuum()?;
        match self.cfg.xi {
            XiSpec::Vacuum => Ok(vac),
            XiSpec::Pair { amplitude } => {
                let cf = self.phi0.coeffs();
                let mut g: Vec<C64> = (0..cf.len()).map(|i| if i == 0 { c(1.0) } else { c(0.0) }).collect();
                let ov = cf[0].conj();
                g.iter_mut().zip(&cf).for_each(|(z, p)| *z -= p * ov);
                let ng = fock::norm(&g);
                g.iter_mut().for_each(|z| *z /= ng);
                let ad = fock::create_fn(b, &g);
                let two = ad.matvec(&ad.matvec(&vac));
                let v: Vec<C64> = vac.iter().zip(&two).map(|(a, p)| a + p * (amplitude / 2f64.sqrt())).collect();
                let nv = fock::norm(&v);
                Ok(v.iter().map(|z| z / nv).collect())
            }
        }
    }
}

/// Advances φ by `dt` with RK4 substeps fine enough that the error is
/// negligible next to the oracle's differencing.
pub fn advance_phi(cfg: &HartreeConfig, phi: &Field, dt: f64) -> Field {
    let sub = ((dt.abs() / 1e-3).ceil() as usize).max(4);
    cfg.evolve_rk4(phi, dt, sub)
}

#[derive(Clone, Debug)]
pub struct Prepared {
    /// Ψ_{N,0} on basis_n (norm ‖1^{≤N}T*ξ‖, not renormalized).
    pub psi: Vec<C64>,
    /// ‖(1 − 1^{≤N})T*ξ‖².
    pub cutoff_loss: f64,
    /// T*ξ on basis_x.
    pub t_star_xi: Vec<C64>,
    pub leak: f64,
}

/// Ψ_{N,0} = U*_{φ₀} 1^{≤N} T*_{N,0} ξ.
pub fn prepare_initial(sc: &Scenario, xi: &[C64], k0: &CMat) -> Result<Prepared> {
    let bx = &sc.basis_x;
    let n = sc.cfg.n;
    let (t_star_xi, leak) = fock::apply_bogoliubov(bx, k0, xi, true, sc.cfg.max_leak)?;
    let kept = fock::truncate_sectors(bx, &t_star_xi, n);
    let total = fock::norm(&t_star_xi).powi(2);
    let cutoff_loss = (total - fock::norm(&kept).powi(2)).max(0.0);
    if cutoff_loss > 0.5 {
        return Err(Error::numerical("oracle", format!("cutoff loss {cutoff_loss} exceeds 0.5")));
    }
    let on_n = fock::transfer(bx, &kept, &sc.basis_n);
    let psi = fock::excitation_map_inverse(&sc.basis_n, &sc.phi0.coeffs(), &on_n, n)?;
    Ok(Prepared { psi, cutoff_loss, t_star_xi, leak })
}

/// e^{−iH_N t}Ψ.
pub fn exact_evolve(sc: &Scenario, psi: &[C64], t: f64) -> Result<Vec<C64>> {
    fock::expmv(&sc.h_n, psi, t, sc.cfg.krylov_tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapRow {
    pub t: f64,
    pub gap_thm1: f64,
    pub gap_thm2: f64,
    pub gap_thm2_no_phase: f64,
    pub cutoff_loss: f64,
    pub depletion_exact: f64,
    pub depletion_quadratic: f64,
    pub energy_drift: f64,
}

#[derive(Clone, Debug)]
pub struct GapSeries {
    pub rows: Vec<GapRow>,
    /// Largest T-leakage seen along the run.
    pub max_leak: f64,
    /// Largest norm defect among the composed maps.
    pub norm_defect: f64,
    /// Gap recomputed from 2 − 2 Re⟨·,·⟩ at the final time (for unit
    /// vectors this equals gap²; here both sides carry their own norms).
    pub overlap_gap_final: f64,
}

/// Runs the exact and both effective pipelines together and evaluates the
/// gap ‖U_{φ_{N,t}}Ψ_{N,t} − T*_{N,t}𝒰_{2,N}(t;0)ξ‖, the same gap with
/// 𝒰_{2,N} replaced by e^{−i∫η}𝒰₂, and the latter without the phase,
/// every `sample_every` steps.
pub fn norm_gaps(sc: &Scenario, sample_every: usize) -> Result<GapSeries> {
    norm_gaps_for(sc, &sc.xi()?, sample_every)
}

pub fn norm_gaps_for(sc: &Scenario, xi: &[C64], sample_every: usize) -> Result<GapSeries> {
    let cfg = &sc.cfg;
    let n = cfg.n;
    let nf = n as f64;
    let bx = &sc.basis_x;
    let opts = AssemblyOptions::default();
    let k0 = sc.kernel(&sc.phi0)?;
    let prep = prepare_initial(sc, xi, &k0)?;
    let mut psi = prep.psi.clone();
    let psi_norm0 = fock::norm(&psi);
    let e0 = fock::inner(&psi, &sc.h_n.matvec(&psi)).re;
    let mut phi = sc.phi0.clone();
    let mut phi_inf = sc.phi0.clone();
    let mut u_n = xi.to_vec();
    let mut u_inf = xi.to_vec();
    let mut theta = 0.0;
    let mut rows = Vec::new();
    let mut max_leak = prep.leak;
    let mut norm_defect: f64 = 0.0;
    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut overlap_gap_final = 0.0;
    for step in 0..=steps {
        let t = step as f64 * dt;
        if step % sample_every.max(1) == 0 || step == steps {
            let k = sc.kernel(&phi)?;
            let lhs = fock::transfer(&sc.basis_n, &fock::excitation_map(&sc.basis_n, &phi.coeffs(), &psi, n)?, bx);
            let (r1, l1) = fock::apply_bogoliubov(bx, &k, &u_n, true, cfg.max_leak)?;
            let (r2, l2) = fock::apply_bogoliubov(bx, &k, &u_inf, true, cfg.max_leak)?;
            max_leak = max_leak.max(l1).max(l2);
            let phase = C64::from_polar(1.0, theta);
            let r2p: Vec<C64> = r2.iter().map(|z| z * phase).collect();
            norm_defect = norm_defect
                .max((fock::norm(&lhs) - psi_norm0).abs())
                .max((fock::norm(&r1) - 1.0).abs())
                .max((fock::norm(&r2) - 1.0).abs());
            let gamma = fock::reduced_density(&sc.basis_n, &psi)?;
            let (dep_exact, _) = fock::bec_metrics(&gamma, &phi.coeffs());
            let num = fock::number_operator(bx);
            let dep_quad = fock::inner(&r1, &num.matvec(&r1)).re / nf;
            let e = fock::inner(&psi, &sc.h_n.matvec(&psi)).re;
            let g1 = fock::distance(&lhs, &r1);
            if step == steps {
                let ov = fock::inner(&lhs, &r1).re;
                overlap_gap_final = (fock::norm(&lhs).powi(2) + fock::norm(&r1).powi(2) - 2.0 * ov).max(0.0).sqrt();
            }
            rows.push(GapRow {
                t,
                gap_thm1: g1,
                gap_thm2: fock::distance(&lhs, &r2p),
                gap_thm2_no_phase: fock::distance(&lhs, &r2),
                cutoff_loss: prep.cutoff_loss,
                depletion_exact: dep_exact,
                depletion_quadratic: dep_quad,
                energy_drift: (e - e0).abs() / e0.abs().max(1.0),
            });
        }
        if step == steps {
            break;
        }
        // midpoint generators
        let phi_mid = advance_phi(&sc.hartree, &phi, dt / 2.0);
        let dphi_mid = sc.hartree.time_derivative(&phi_mid);
        let g_n = quadgen::assemble_g2nt(&phi_mid, &dphi_mid, &sc.scat, &opts, t + dt / 2.0)?;
        let inf_mid = advance_phi(&sc.nls, &phi_inf, dt / 2.0);
        let dinf_mid = sc.nls.time_derivative(&inf_mid);
        let g_inf = quadgen::assemble_g2t(&inf_mid, &dinf_mid, sc.b0, cfg.ell, &opts, t + dt / 2.0)?;
        u_n = fock::expmv(&fock::build_quadratic_operator(&g_n.gen, bx)?, &u_n, dt, cfg.krylov_tol)?;
        u_inf = fock::expmv(&fock::build_quadratic_operator(&g_inf.gen, bx)?, &u_inf, dt, cfg.krylov_tol)?;
        theta -= g_n.eta * dt;
        psi = exact_evolve(sc, &psi, dt)?;
        phi = advance_phi(&sc.hartree, &phi, dt);
        phi_inf = advance_phi(&sc.nls, &phi_inf, dt);
    }
    Ok(GapSeries { rows, max_leak, norm_defect, overlap_gap_final })
}

/// Residual ‖i(Φ(t+δ) − Φ(t−δ))/(2δ) − ℒ_{N,t}Φ(t)‖ with Φ = U_{φ_t}Ψ_t,
/// Ψ_t the exact evolution of the prepared state.
pub fn generator_residual(sc: &Scenario, t: f64, deltas: &[f64], order: fock::NumberOrder) -> Result<Vec<f64>> {
    let n = sc.cfg.n;
    let k0 = sc.kernel(&sc.phi0)?;
    let prep = prepare_initial(sc, &sc.xi()?, &k0)?;
    let state_at = |s: f64| -> Result<(Field, Vec<C64>)> {
        let phi = advance_phi(&sc.hartree, &sc.phi0, s);
        let psi = exact_evolve(sc, &prep.psi, s)?;
        let out = fock::excitation_map(&sc.basis_n, &phi.coeffs(), &psi, n)?;
        Ok((phi, out))
    };
    let (phi_t, big_phi) = state_at(t)?;
    let l_phi = sc.lnt(&phi_t, order)?.matvec(&big_phi);
    let mut out = Vec::new();
    for &d in deltas {
        let (_, plus) = state_at(t + d)?;
        let (_, minus) = state_at(t - d)?;
        let res: f64 = plus
            .iter()
            .zip(&minus)
            .zip(&l_phi)
            .map(|((p, m), l)| (C64::new(0.0, 1.0) * (p - m) / (2.0 * d) - l).norm_sqr())
            .sum::<f64>()
            .sqrt();
        out.push(res);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub n: usize,
    /// tr|γ_N − |φ₀⟩⟨φ₀||.
    pub a_n: f64,
    /// |⟨Ψ, H_N Ψ⟩/N − (‖∇φ₀‖² + ½⟨φ₀, (V_N f_N ∗ |φ₀|²)φ₀⟩)|.
    pub b_n: f64,
    /// ⟨ξ, (𝒦+𝒩)ξ⟩ for the input and for ξ = T U_{φ₀}Ψ.
    pub kn_input: f64,
    pub kn_recovered: f64,
    pub cutoff_loss: f64,
}

fn kinetic_plus_number(basis: &FockBasis, grid: &Grid, v: &[C64]) -> Result<f64> {
    let k = fock::dgamma(basis, &quadgen::neg_laplacian_op(grid))?;
    let op = k.add(&fock::number_operator(basis))?;
    Ok(fock::inner(v, &op.matvec(v)).re / fock::norm(v).powi(2))
}

/// Checks the moment hypotheses N a_N, N b_N on the prepared state Ψ
/// (normalized internally).
pub fn hypothesis_check(sc: &Scenario) -> Result<HypothesisReport> {
    let n = sc.cfg.n;
    let xi = sc.xi()?;
    let k0 = sc.kernel(&sc.phi0)?;
    let prep = prepare_initial(sc, &xi, &k0)?;
    let np = fock::norm(&prep.psi);
    let psi: Vec<C64> = prep.psi.iter().map(|z| z / np).collect();
    let gamma = fock::reduced_density(&sc.basis_n, &psi)?;
    let (_, a_n) = fock::bec_metrics(&gamma, &sc.phi0.coeffs());
    let e = fock::inner(&psi, &sc.h_n.matvec(&psi)).re / n as f64;
    let b_n = (e - sc.hartree.energy(&sc.phi0)).abs();
    let back = fock::excitation_map(&sc.basis_n, &sc.phi0.coeffs(), &psi, n)?;
    let (xi_rec, _) = fock::apply_bogoliubov(&sc.basis_x, &k0, &fock::transfer(&sc.basis_n, &back, &sc.basis_x), false, 1.0)?;
    Ok(HypothesisReport {
        n,
        a_n,
        b_n,
        kn_input: kinetic_plus_number(&sc.basis_x, &sc.grid, &xi)?,
        kn_recovered: kinetic_plus_number(&sc.basis_x, &sc.grid, &xi_rec)?,
        cutoff_loss: prep.cutoff_loss,
    })
}
