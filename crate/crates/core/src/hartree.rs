//! Modified Hartree equation i∂φ = −Δφ + (W∗|φ|²)φ with W = V_N f_N, and
//! the cubic limit i∂φ = −Δφ + σ|φ|²φ, integrated by Strang splitting.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::scattering::{PotentialSpec, ScatteringSolution};

#[derive(Clone, Debug)]
pub enum Interaction {
    /// Periodic convolution with a real even kernel.
    Kernel(Field),
    /// Local cubic nonlinearity σ|φ|².
    Contact(f64),
}

#[derive(Clone, Debug)]
pub struct HartreeConfig {
    pub grid: Grid,
    pub interaction: Interaction,
    pub dt: f64,
}

impl HartreeConfig {
    pub fn with_kernel(w: Field, dt: f64) -> Result<Self> {
        if w.data.iter().any(|z| z.im.abs() > 1e-12 * (1.0 + z.re.abs())) {
            return Err(Error::pre("interaction kernel must be real"));
        }
        let cfg = HartreeConfig { grid: w.grid, interaction: Interaction::Kernel(w), dt };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn contact(grid: Grid, sigma: f64, dt: f64) -> Result<Self> {
        let cfg = HartreeConfig { grid, interaction: Interaction::Contact(sigma), dt };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Kernel V_N f_N from a scattering solution, cell-averaged on the grid.
    pub fn modified(grid: Grid, pot: &PotentialSpec, scat: Option<&ScatteringSolution>, dt: f64) -> Result<Self> {
        if pot.mode.dim() != grid.d {
            return Err(Error::config(format!(
                "potential mode is {}-dimensional but the grid has d = {}",
                pot.mode.dim(),
                grid.d
            )));
        }
        let w = match scat {
            Some(s) => pot.sample_on_grid(&grid, |r| s.f_at(r)),
            None => pot.sample_on_grid(&grid, |_| 1.0),
        };
        Self::with_kernel(w, dt)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(Error::config(format!("time step {} must be nonzero", self.dt)));
        }
        Ok(())
    }

    /// dt·max|k|², the splitting-error bookkeeping number (≤ π advised).
    pub fn stiffness(&self) -> f64 {
        self.dt.abs() * self.grid.max_k2()
    }

    /// The mean-field potential W∗|φ|² (or σ|φ|²), real.
    pub fn potential(&self, phi: &Field) -> Vec<f64> {
        match &self.interaction {
            Interaction::Kernel(w) => {
                let rho = phi.abs2();
                let p = w.convolve(&rho).expect("grid checked at construction");
                p.data.iter().map(|z| z.re).collect()
            }
            Interaction::Contact(s) => phi.data.iter().map(|z| s * z.norm_sqr()).collect(),
        }
    }

    /// The pair kernel as a field on the grid (contact: σ/h^d at the origin).
    pub fn kernel_field(&self) -> Field {
        match &self.interaction {
            Interaction::Kernel(w) => w.clone(),
            Interaction::Contact(s) => {
                let mut f = Field::zeros(self.grid);
                f.data[0] = C64::new(s / self.grid.cell(), 0.0);
                f
            }
        }
    }

    /// One Strang step of size `dt` (may be negative).
    pub fn step_by(&self, phi: &Field, dt: f64) -> Field {
        let half = |f: &Field| -> Field {
            let v = self.potential(f);
            Field {
                grid: f.grid,
                data: f.data.iter().zip(&v).map(|(z, p)| z * C64::from_polar(1.0, -p * dt / 2.0)).collect(),
            }
        };
        let a = half(phi);
        let b = a.fourier_multiply(|k2| C64::from_polar(1.0, -k2 * dt));
        half(&b)
    }

    pub fn step(&self, phi: &Field) -> Result<Field> {
        self.grid.check_same(&phi.grid)?;
        let m = phi.norm();
        if (m - 1.0).abs() > 1e-8 {
            return Err(Error::pre(format!("field norm {m} differs from 1")));
        }
        let out = self.step_by(phi, self.dt);
        if !out.is_finite() {
            return Err(Error::numerical("hartree", "NaN in Strang step 0"));
        }
        Ok(out)
    }

    /// −i(−Δφ + (W∗|φ|²)φ).
    pub fn time_derivative(&self, phi: &Field) -> Field {
        let v = self.potential(phi);
        let lap = phi.laplacian();
        Field {
            grid: phi.grid,
            data: phi
                .data
                .iter()
                .zip(&lap.data)
                .zip(&v)
                .map(|((z, l), p)| C64::new(0.0, -1.0) * (-l + z * p))
                .collect(),
        }
    }

    /// E[φ] = ‖∇φ‖² + ½⟨|φ|², W∗|φ|²⟩.
    pub fn energy(&self, phi: &Field) -> f64 {
        let v = self.potential(phi);
        let pot: f64 = phi.data.iter().zip(&v).map(|(z, p)| z.norm_sqr() * p).sum::<f64>() * self.grid.cell();
        phi.grad_norm2() + 0.5 * pot
    }

    pub fn diagnostics(&self, t: f64, phi: &Field) -> Diagnostics {
        Diagnostics {
            t,
            mass: phi.norm().powi(2),
            energy: self.energy(phi),
            h1: phi.norm_hs(1.0),
            h4: phi.norm_hs(4.0),
        }
    }

    /// Repeated Strang steps up to `t_final`, recording diagnostics (and
    /// optionally the field) every `sample_every` steps.
    pub fn evolve(&self, phi0: &Field, t_final: f64, sample_every: usize, keep_fields: bool) -> Result<Trajectory> {
        let steps = (t_final / self.dt).round() as i64;
        if steps < 0 || ((steps as f64) * self.dt - t_final).abs() > 1e-9 * t_final.abs().max(1.0) {
            return Err(Error::config(format!("t_final {t_final} is not a multiple of dt {}", self.dt)));
        }
        let every = sample_every.max(1);
        let mut phi = phi0.clone();
        self.step(&phi)?;
        let mut traj = Trajectory { diagnostics: vec![self.diagnostics(0.0, &phi)], times: vec![0.0], ..Default::default() };
        if keep_fields {
            traj.fields.push(phi.clone());
        }
        for s in 1..=steps as usize {
            phi = self.step_by(&phi, self.dt);
            if !phi.is_finite() {
                return Err(Error::numerical("hartree", format!("NaN in Strang step {s}")));
            }
            if s % every == 0 || s == steps as usize {
                let t = s as f64 * self.dt;
                traj.diagnostics.push(self.diagnostics(t, &phi));
                traj.times.push(t);
                if keep_fields {
                    traj.fields.push(phi.clone());
                }
            }
        }
        traj.final_field = Some(phi);
        Ok(traj)
    }

    /// Classical RK4 on the semi-discrete equation with `substeps` steps
    /// over `t`; used where the splitting error must be negligible.
    pub fn evolve_rk4(&self, phi0: &Field, t: f64, substeps: usize) -> Field {
        let dt = t / substeps as f64;
        let mut phi = phi0.clone();
        let axpy = |a: &Field, b: &Field, s: f64| -> Field {
            Field { grid: a.grid, data: a.data.iter().zip(&b.data).map(|(x, y)| x + y * s).collect() }
        };
        for _ in 0..substeps {
            let k1 = self.time_derivative(&phi);
            let k2 = self.time_derivative(&axpy(&phi, &k1, dt / 2.0));
            let k3 = self.time_derivative(&axpy(&phi, &k2, dt / 2.0));
            let k4 = self.time_derivative(&axpy(&phi, &k3, dt));
            let sum = Field {
                grid: phi.grid,
                data: (0..phi.data.len())
                    .map(|i| k1.data[i] + k2.data[i] * 2.0 + k3.data[i] * 2.0 + k4.data[i])
                    .collect(),
            };
            phi = axpy(&phi, &sum, dt / 6.0);
        }
        phi
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub h1: f64,
    pub h4: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    pub fields: Vec<Field>,
    pub final_field: Option<Field>,
}

impl Trajectory {
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.diagnostics[0].mass;
        self.diagnostics.iter().map(|d| (d.mass - m0).abs()).fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.diagnostics[0].energy;
        self.diagnostics.iter().map(|d| (d.energy - e0).abs()).fold(0.0, f64::max)
    }

    pub fn final_field(&self) -> &Field {
        self.final_field.as_ref().expect("trajectory has a final field")
    }
}

/// Normalized periodic Gaussian bump centred at `centre`, width `width`,
/// carrying momentum `p` along the first axis.
pub fn gaussian_bump(grid: Grid, centre: [f64; 3], width: f64, p: f64) -> Field {
    let l = grid.l;
    let raw = Field::from_fn(grid, |x| {
        let mut amp = 1.0;
        for a in 0..grid.d {
            let mut s = 0.0;
            for img in -2..=2 {
                let dx = x[a] - centre[a] + img as f64 * l;
                s += (-dx * dx / (2.0 * width * width)).exp();
            }
            amp *= s;
        }
        C64::from_polar(amp, p * x[0])
    });
    let n = raw.norm();
    raw.scale(C64::new(1.0 / n, 0.0))
}

/// A smooth asymmetric test state: sum of two displaced bumps with
/// different phases, normalized.
pub fn two_bump(grid: Grid, width: f64) -> Field {
    let l = grid.l;
    let a = gaussian_bump(grid, [0.4 * l, 0.5 * l, 0.5 * l], width, 2.0 * std::f64::consts::PI / l);
    let b = gaussian_bump(grid, [0.65 * l, 0.45 * l, 0.55 * l], 0.7 * width, 0.0);
    let s = a.add(&b.scale(C64::from_polar(0.8, 1.1)));
    let n = s.norm();
    s.scale(C64::new(1.0 / n, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{solve_neumann, Mode};
    use std::f64::consts::PI;

    fn bump_kernel(grid: Grid) -> Field {
        let l = grid.l;
        Field::from_index_fn(grid, |i| {
            let r = grid.radius(i);
            let v = if r < 0.1 * l { (PI * r / (0.2 * l)).cos().powi(2) * 3.0 } else { 0.0 };
            C64::new(v, 0.0)
        })
    }

    #[test]
    fn free_plane_wave_phase() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let p = 2.0 * PI * 3.0 / 4.0;
        let phi = Field::from_fn(g, |x| C64::from_polar(1.0 / 2.0, p * x[0]));
        let cfg = HartreeConfig::with_kernel(Field::zeros(g), 0.01).unwrap();
        let out = cfg.step(&phi).unwrap();
        let expect = phi.scale(C64::from_polar(1.0, -p * p * 0.01));
        assert!(out.sub(&expect).norm() < 1e-12);
        let dphi = cfg.time_derivative(&phi);
        assert!(dphi.sub(&phi.scale(C64::new(0.0, -p * p))).norm() < 1e-10);
    }

    #[test]
    fn homogeneous_state_only_rotates() {
        let g = Grid::new(2, 8, 3.0).unwrap();
        let w = bump_kernel(g);
        let c = w.data.iter().map(|z| z.re).sum::<f64>() * g.cell() / g.volume();
        let phi = Field::from_fn(g, |_| C64::new(1.0 / 3.0, 0.0));
        let cfg = HartreeConfig::with_kernel(w, 0.01).unwrap();
        let traj = cfg.evolve(&phi, 1.0, 100, false).unwrap();
        let expect = phi.scale(C64::from_polar(1.0, -c));
        assert!(traj.final_field().sub(&expect).norm() < 1e-10);
        let d = cfg.time_derivative(&phi);
        assert!(d.sub(&phi.scale(C64::new(0.0, -c))).norm() < 1e-12);
    }

    #[test]
    fn strang_is_second_order() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = two_bump(g, 0.8);
        let errs: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dt| {
                let a = HartreeConfig::with_kernel(bump_kernel(g), dt).unwrap();
                let b = HartreeConfig::with_kernel(bump_kernel(g), dt / 2.0).unwrap();
                let fa = a.evolve(&phi, 0.4, 1000, false).unwrap();
                let fb = b.evolve(&phi, 0.4, 1000, false).unwrap();
                fa.final_field().sub(fb.final_field()).norm()
            })
            .collect();
        let slope = crate::linalg::loglog_slope(&[0.02, 0.01, 0.005], &errs);
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn time_derivative_matches_central_difference() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = two_bump(g, 0.8);
        let cfg = HartreeConfig::with_kernel(bump_kernel(g), 1e-3).unwrap();
        let exact = cfg.time_derivative(&phi);
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&dt| {
                let plus = cfg.evolve_rk4(&phi, dt, 4);
                let minus = cfg.evolve_rk4(&phi, -dt, 4);
                plus.sub(&minus).scale(C64::new(0.5 / dt, 0.0)).sub(&exact).norm()
            })
            .collect();
        let slope = crate::linalg::loglog_slope(&[4e-3, 2e-3, 1e-3], &errs);
        assert!((slope - 2.0).abs() < 0.2, "slope {slope} {errs:?}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn gauge_covariance_and_reversibility(theta in -3.2f64..3.2, dt in 1e-3f64..2e-2) {
            let g = Grid::new(1, 64, 8.0).unwrap();
            let phi = two_bump(g, 0.8);
            let cfg = HartreeConfig::with_kernel(bump_kernel(g), 0.01).unwrap();
            let rot = C64::from_polar(1.0, theta);
            let a = cfg.evolve(&phi.scale(rot), 0.2, 100, false).unwrap();
            let b = cfg.evolve(&phi, 0.2, 100, false).unwrap();
            proptest::prop_assert!(a.final_field().sub(&b.final_field().scale(rot)).norm() < 1e-12);
            let fwd = cfg.step_by(&phi, dt);
            let back = cfg.step_by(&fwd, -dt);
            proptest::prop_assert!(back.sub(&phi).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_unnormalized_input() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        let cfg = HartreeConfig::contact(g, 1.0, 0.01).unwrap();
        let phi = Field::from_fn(g, |_| C64::new(1.0, 0.0));
        assert!(cfg.step(&phi).is_err());
    }

    #[test]
    fn modified_kernel_approaches_contact() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = two_bump(g, 0.8);
        let base = PotentialSpec { v0: 2.0, r_support: 1.0, beta: 0.5, n_particles: 1.0, mode: Mode::Interval1 };
        let contact = HartreeConfig::contact(g, base.b0(), 0.01).unwrap();
        let reference = contact.evolve(&phi, 0.5, 10, true).unwrap();
        let mut last = f64::INFINITY;
        for n in [16.0, 256.0, 4096.0] {
            let pot = base.with_n(n);
            let s = solve_neumann(&pot, 1.0, 4000).unwrap();
            let cfg = HartreeConfig::modified(g, &pot, Some(&s), 0.01).unwrap();
            let tr = cfg.evolve(&phi, 0.5, 10, true).unwrap();
            let gap = tr.fields.iter().zip(&reference.fields).map(|(a, b)| a.sub(b).norm()).fold(0.0, f64::max);
            assert!(gap < last, "N={n}: {gap} vs {last}");
            last = gap;
        }
    }
}
