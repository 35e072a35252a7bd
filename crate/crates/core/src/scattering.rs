//! Neumann ground state of −Δ + V_N/(2N) on the ball (or interval) of
//! radius ℓ, the correlation profile ω_N = 1 − f_N, and its N → ∞ limit.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Radial problem in three dimensions.
    Radial3,
    /// Even problem on [−ℓ, ℓ] in one dimension.
    Interval1,
}

impl Mode {
    pub fn dim(self) -> usize {
        match self {
            Mode::Radial3 => 3,
            Mode::Interval1 => 1,
        }
    }
}

/// cos²-bump potential V(r) = V₀cos²(πr/2R) on r ≤ R together with its
/// N-dependent scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub v0: f64,
    pub r_support: f64,
    pub beta: f64,
    pub n_particles: f64,
    pub mode: Mode,
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0 >= 0.0 && self.v0.is_finite()) {
            return Err(Error::config(format!("potential strength {} must be >= 0", self.v0)));
        }
        if !(self.r_support > 0.0) {
            return Err(Error::config("potential support radius must be positive"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(format!("beta {} not in (0, 1)", self.beta)));
        }
        if !(self.n_particles >= 1.0) {
            return Err(Error::config("particle number must be >= 1"));
        }
        Ok(())
    }

    /// Unscaled profile V(r).
    pub fn v(&self, r: f64) -> f64 {
        if r > self.r_support {
            0.0
        } else {
            let c = (PI * r / (2.0 * self.r_support)).cos();
            self.v0 * c * c
        }
    }

    /// ∫V over ℝ³ (radial mode) or ℝ (interval mode).
    pub fn b0(&self) -> f64 {
        let r = self.r_support;
        match self.mode {
            Mode::Radial3 => 4.0 * PI * self.v0 * r.powi(3) * (1.0 / 6.0 - 1.0 / (PI * PI)),
            Mode::Interval1 => self.v0 * r,
        }
    }

    /// Support radius R·N^{−β} of the scaled potential.
    pub fn scaled_support(&self) -> f64 {
        self.r_support * self.n_particles.powf(-self.beta)
    }

    /// V_N(r) = N^{dβ}V(N^β r).
    pub fn v_n(&self, r: f64) -> f64 {
        let s = self.n_particles.powf(self.beta);
        s.powi(self.mode.dim() as i32) * self.v(s * r)
    }

    pub fn with_n(&self, n: f64) -> Self {
        PotentialSpec { n_particles: n, ..*self }
    }

    /// Cell averages of V_N(x)·w(|x|) on the grid sites (minimal image
    /// around the origin), so that h^d Σ reproduces the integral even when
    /// the scaled support is comparable to the spacing.
    pub fn sample_on_grid(&self, grid: &Grid, w: impl Fn(f64) -> f64) -> Field {
        let sub = if grid.d == 1 { 64 } else if grid.d == 2 { 12 } else { 6 };
        let h = grid.h();
        let reach = self.scaled_support() + h;
        let offsets: Vec<f64> = (0..sub).map(|s| ((s as f64 + 0.5) / sub as f64 - 0.5) * h).collect();
        let total = (sub as f64).powi(grid.d as i32);
        Field::from_index_fn(*grid, |idx| {
            let disp = grid.displacement(0, idx);
            let centre = [disp[0] as f64 * h, disp[1] as f64 * h, disp[2] as f64 * h];
            let r0 = centre.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r0 > reach + h {
                return C64::new(0.0, 0.0);
            }
            let mut acc = 0.0;
            let ny = if grid.d >= 2 { sub } else { 1 };
            let nz = if grid.d >= 3 { sub } else { 1 };
            for ox in &offsets {
                for iy in 0..ny {
                    for iz in 0..nz {
                        let oy = if grid.d >= 2 { offsets[iy] } else { 0.0 };
                        let oz = if grid.d >= 3 { offsets[iz] } else { 0.0 };
                        let r = ((centre[0] + ox).powi(2) + (centre[1] + oy).powi(2) + (centre[2] + oz).powi(2)).sqrt();
                        let v = self.v_n(r);
                        if v != 0.0 {
                            acc += v * w(r);
                        }
                    }
                }
            }
            C64::new(acc / total, 0.0)
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub pot: PotentialSpec,
    pub ell: f64,
    pub lambda: f64,
    /// Uniform mesh on [0, ℓ] including both end points.
    pub r: Vec<f64>,
    /// f_N on the mesh, normalized to f(ℓ) = 1.
    pub f: Vec<f64>,
}

/// Solve the Neumann problem with a uniform `mesh_points` mesh.
pub fn solve_neumann(pot: &PotentialSpec, ell: f64, mesh_points: usize) -> Result<ScatteringSolution> {
    pot.validate()?;
    if mesh_points < 2000 {
        return Err(Error::pre(format!("mesh_points {mesh_points} < 2000")));
    }
    if !(ell > pot.scaled_support()) {
        return Err(Error::pre(format!(
            "Neumann radius {ell} must exceed the scaled support {}",
            pot.scaled_support()
        )));
    }
    let n = mesh_points;
    let h = ell / n as f64;
    if pot.v0 == 0.0 {
        let r = (0..=n).map(|i| i as f64 * h).collect();
        return Ok(ScatteringSolution { pot: *pot, ell, lambda: 0.0, r, f: vec![1.0; n + 1] });
    }
    let inv_h2 = 1.0 / (h * h);
    let two_n = 2.0 * pot.n_particles;
    // unknowns: u_1..u_n (radial, u = r f) or f_0..f_n (interval)
    let (diag, off, mass, nodes): (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) = match pot.mode {
        Mode::Radial3 => {
            let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
            let mut diag: Vec<f64> = nodes.iter().map(|&r| 2.0 * inv_h2 + pot.v_n(r) / two_n).collect();
            let mut mass = vec![1.0; n];
            // ghost point u_{n+1} = u_{n-1} + 2h u_n/ℓ, last row halved
            diag[n - 1] = (1.0 - h / ell) * inv_h2 + 0.5 * pot.v_n(ell) / two_n;
            mass[n - 1] = 0.5;
            (diag, vec![-inv_h2; n - 1], mass, nodes)
        }
        Mode::Interval1 => {
            let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
            let mut diag: Vec<f64> = nodes.iter().map(|&r| 2.0 * inv_h2 + pot.v_n(r) / two_n).collect();
            let mut mass = vec![1.0; n + 1];
            diag[0] = inv_h2 + 0.5 * pot.v_n(0.0) / two_n;
            diag[n] = inv_h2 + 0.5 * pot.v_n(ell) / two_n;
            mass[0] = 0.5;
            mass[n] = 0.5;
            (diag, vec![-inv_h2; n], mass, nodes)
        }
    };
    let (lambda, x) = ground_state(&diag, &off, &mass, pot, h, ell)?;
    if lambda < -1e-12 * (1.0 + pot.b0()) {
        return Err(Error::numerical("scattering", format!("negative ground eigenvalue {lambda}")));
    }
    let lambda = lambda.max(0.0);
    let mut f: Vec<f64> = match pot.mode {
        Mode::Radial3 => {
            let mut f = vec![0.0; n + 1];
            for i in 0..n {
                f[i + 1] = x[i] / nodes[i];
            }
            f[0] = (4.0 * f[1] - f[2]) / 3.0;
            f
        }
        Mode::Interval1 => x,
    };
    let norm = f[n];
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::numerical("scattering", "ground state vanishes at the boundary"));
    }
    f.iter_mut().for_each(|v| *v /= norm);
    if f.iter().skip(1).any(|&v| v <= 0.0) {
        return Err(Error::numerical("scattering", "ground state is not positive"));
    }
    let r = (0..=n).map(|i| i as f64 * h).collect();
    Ok(ScatteringSolution { pot: *pot, ell, lambda, r, f })
}

/// Smallest eigenpair of the symmetric tridiagonal pencil (T, diag(mass))
/// by inverse iteration with a shift below the spectrum.
fn ground_state(
    diag: &[f64],
    off: &[f64],
    mass: &[f64],
    pot: &PotentialSpec,
    h: f64,
    ell: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = diag.len();
    let sigma = -1.0;
    let shifted: Vec<f64> = diag.iter().zip(mass).map(|(d, m)| d - sigma * m).collect();
    // start from the V = 0 ground state
    let mut x: Vec<f64> = match pot.mode {
        Mode::Radial3 => (1..=n).map(|i| i as f64 * h).collect(),
        Mode::Interval1 => vec![1.0; n],
    };
    let mut lambda = f64::NAN;
    for it in 0..200 {
        let rhs: Vec<f64> = x.iter().zip(mass).map(|(v, m)| v * m).collect();
        let y = thomas(&shifted, off, &rhs);
        let s = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::numerical("scattering", "inverse iteration breakdown"));
        }
        let y: Vec<f64> = y.iter().map(|v| v / s).collect();
        let new_lambda = rayleigh(diag, off, mass, &y, pot, h, ell);
        let change = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        // the Rayleigh quotient carries round-off at the kinetic scale 1/ℓ²
        let tol = 1e-13 * new_lambda.abs() + 1e-14 / (ell * ell);
        if it > 2 && change < 1e-14 && (new_lambda - lambda).abs() <= tol {
            return Ok((new_lambda, x));
        }
        lambda = new_lambda;
    }
    Err(Error::numerical("scattering", "inverse iteration did not converge"))
}

/// Rayleigh quotient written through first differences to avoid the
/// cancellation of the 1/h² terms against the boundary row.
fn rayleigh(diag: &[f64], off: &[f64], mass: &[f64], x: &[f64], pot: &PotentialSpec, h: f64, ell: f64) -> f64 {
    let n = x.len();
    let inv_h2 = 1.0 / (h * h);
    let mut num = 0.0;
    let potential: f64 = match pot.mode {
        Mode::Radial3 => {
            // Σ (u_i − u_{i−1})²/h² with u_0 = 0, minus the Robin term
            let mut prev = 0.0;
            for &u in x {
                num += (u - prev) * (u - prev) * inv_h2;
                prev = u;
            }
            num -= x[n - 1] * x[n - 1] / (h * ell);
            (0..n)
                .map(|i| {
                    let kin = if i + 1 < n { 2.0 * inv_h2 } else { (1.0 - h / ell) * inv_h2 };
                    (diag[i] - kin) * x[i] * x[i]
                })
                .sum()
        }
        Mode::Interval1 => {
            for w in x.windows(2) {
                num += (w[1] - w[0]) * (w[1] - w[0]) * inv_h2;
            }
            (0..n)
                .map(|i| {
                    let kin = if i == 0 || i + 1 == n { inv_h2 } else { 2.0 * inv_h2 };
                    (diag[i] - kin) * x[i] * x[i]
                })
                .sum()
        }
    };
    let _ = off;
    let den: f64 = x.iter().zip(mass).map(|(v, m)| v * v * m).sum();
    (num + potential) / den
}

/// Tridiagonal solve with constant off-diagonal entries given per row.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = diag[0];
    c[0] = if n > 1 { off[0] / b } else { 0.0 };
    d[0] = rhs[0] / b;
    for i in 1..n {
        b = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / b;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / b;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

impl ScatteringSolution {
    pub fn n(&self) -> f64 {
        self.pot.n_particles
    }

    fn h(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    /// f_N(r), cubic interpolation on the mesh, f ≡ 1 beyond ℓ.
    pub fn f_at(&self, r: f64) -> f64 {
        if r >= self.ell {
            return 1.0;
        }
        let r = r.abs();
        let h = self.h();
        let n = self.r.len() - 1;
        let t = r / h;
        let i = (t.floor() as usize).min(n - 1);
        let s = t - i as f64;
        let at = |k: isize| -> f64 {
            // even reflection at 0, Neumann reflection at ℓ
            let k = if k < 0 { -k } else { k } as usize;
            let k = if k > n { 2 * n - k } else { k };
            self.f[k]
        };
        let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
        // Catmull-Rom
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = -0.5 * p0 + 0.5 * p2;
        ((a * s + b) * s + c) * s + p1
    }

    pub fn omega_at(&self, r: f64) -> f64 {
        1.0 - self.f_at(r)
    }

    pub fn omega(&self) -> Vec<f64> {
        self.f.iter().map(|v| 1.0 - v).collect()
    }

    /// N λ_N · 8πℓ³/(3b₀) in radial mode, N λ_N · 4ℓ/b₀ in interval mode;
    /// tends to 1.
    pub fn normalized_lambda(&self) -> f64 {
        let b0 = self.pot.b0();
        match self.pot.mode {
            Mode::Radial3 => self.n() * self.lambda * 8.0 * PI * self.ell.powi(3) / (3.0 * b0),
            Mode::Interval1 => self.n() * self.lambda * 4.0 * self.ell / b0,
        }
    }

    /// sup_r N ω_N(r)(r + N^{−β}).
    pub fn sup_omega_bound(&self) -> f64 {
        let s = self.n().powf(-self.pot.beta);
        self.r
            .iter()
            .zip(&self.f)
            .map(|(r, f)| self.n() * (1.0 - f) * (r + s))
            .fold(0.0, f64::max)
    }

    /// sup_r N |ω_N′(r)| (r + N^{−β})², centred differences.
    pub fn sup_gradient_bound(&self) -> f64 {
        let s = self.n().powf(-self.pot.beta);
        let h = self.h();
        let n = self.r.len() - 1;
        (1..n)
            .map(|i| {
                let d = (self.f[i + 1] - self.f[i - 1]) / (2.0 * h);
                self.n() * d.abs() * (self.r[i] + s).powi(2)
            })
            .fold(0.0, f64::max)
    }

    /// sup over [δ, ℓ] of |N ω_N − ω_∞| with δ = 2R N^{−β}; `None` when the
    /// window is empty.
    pub fn sup_limit_error(&self) -> Option<f64> {
        let delta = 2.0 * self.pot.scaled_support();
        if delta > self.ell {
            return None;
        }
        let b0 = self.pot.b0();
        let mut sup = 0.0f64;
        for (r, f) in self.r.iter().zip(&self.f) {
            if *r < delta || *r <= 0.0 {
                continue;
            }
            let lim = match self.pot.mode {
                Mode::Radial3 => omega_infinity(b0, self.ell, *r).unwrap_or(0.0),
                Mode::Interval1 => omega_infinity_1d(b0, self.ell, *r),
            };
            sup = sup.max((self.n() * (1.0 - f) - lim).abs());
        }
        Some(sup)
    }

    /// Monotonicity of f on the mesh (allowing round-off).
    pub fn is_monotone(&self) -> bool {
        self.f.windows(2).all(|w| w[1] >= w[0] - 1e-12)
    }
}

/// ω_∞(r) = (b₀/8π)[1/r − 3/(2ℓ) + r²/(2ℓ³)] for 0 < r ≤ ℓ, zero beyond.
pub fn omega_infinity(b0: f64, ell: f64, r: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::pre("ℓ must be positive"));
    }
    if !(r > 0.0) {
        return Err(Error::pre(format!("ω_∞ is singular at r = {r}")));
    }
    if r > ell {
        return Ok(0.0);
    }
    Ok(b0 / (8.0 * PI) * (1.0 / r - 1.5 / ell + r * r / (2.0 * ell.powi(3))))
}

/// One-dimensional analogue, the limit of Nω_N in interval mode:
/// (b₀/8ℓ)(ℓ − |x|)² for |x| ≤ ℓ.
pub fn omega_infinity_1d(b0: f64, ell: f64, x: f64) -> f64 {
    let x = x.abs();
    if x > ell {
        0.0
    } else {
        b0 / (8.0 * ell) * (ell - x).powi(2)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub n: f64,
    pub error: f64,
    pub empty_window: bool,
}

/// Limit-profile convergence table over an increasing list of N.
pub fn verify_limit_profile(pot: &PotentialSpec, ell: f64, ns: &[f64], mesh_points: usize) -> Result<Vec<LimitRow>> {
    if pot.mode != Mode::Radial3 {
        return Err(Error::pre("limit profile check runs in radial mode"));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::pre("N list must be increasing"));
    }
    ns.iter()
        .map(|&n| {
            let p = pot.with_n(n);
            if 2.0 * p.scaled_support() > ell {
                return Ok(LimitRow { n, error: 0.0, empty_window: true });
            }
            let s = solve_neumann(&p, ell, mesh_points)?;
            let e = s.sup_limit_error().unwrap_or(0.0);
            Ok(LimitRow { n, error: e, empty_window: false })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump(n: f64) -> PotentialSpec {
        PotentialSpec { v0: 1.0, r_support: 1.0, beta: 0.5, n_particles: n, mode: Mode::Radial3 }
    }

    #[test]
    fn b0_of_the_bump() {
        assert!((bump(1.0).b0() - 4.0 * PI * (1.0 / 6.0 - 1.0 / (PI * PI))).abs() < 1e-15);
        // midpoint-rule oracle
        let p = bump(1.0);
        let m = 200000;
        let q: f64 = (0..m)
            .map(|i| {
                let r = (i as f64 + 0.5) / m as f64;
                4.0 * PI * p.v(r) * r * r / m as f64
            })
            .sum();
        assert!((q - p.b0()).abs() < 1e-9);
        let p1 = PotentialSpec { mode: Mode::Interval1, r_support: 0.7, ..p };
        assert!((p1.b0() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_potential_gives_trivial_solution() {
        for mode in [Mode::Radial3, Mode::Interval1] {
            let p = PotentialSpec { v0: 0.0, mode, ..bump(100.0) };
            let s = solve_neumann(&p, 1.0, 2000).unwrap();
            assert_eq!(s.lambda, 0.0);
            assert!(s.f.iter().all(|v| *v == 1.0));
            assert_eq!(s.sup_omega_bound(), 0.0);
        }
    }

    #[test]
    fn omega_infinity_values() {
        assert_eq!(omega_infinity(3.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(omega_infinity(3.0, 1.0, 2.0).unwrap(), 0.0);
        assert!((omega_infinity(8.0 * PI, 1.0, 0.5).unwrap() - 5.0 / 8.0).abs() < 1e-15);
        assert!(omega_infinity(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn invariants_of_a_solution() {
        let s = solve_neumann(&bump(1000.0), 1.0, 4000).unwrap();
        assert!(s.lambda > 0.0);
        assert!((s.f_at(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(s.f_at(1.5), 1.0);
        assert!(s.is_monotone());
        assert!(s.omega().iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn small_n_normalized_eigenvalue_is_near_one() {
        let s = solve_neumann(&bump(1e4), 1.0, 20000).unwrap();
        assert!((s.normalized_lambda() - 1.0).abs() < 0.05, "{}", s.normalized_lambda());
    }

    #[test]
    fn interval_mode_matches_its_limits() {
        let p = PotentialSpec { mode: Mode::Interval1, ..bump(1e4) };
        let s = solve_neumann(&p, 1.0, 20000).unwrap();
        assert!((s.normalized_lambda() - 1.0).abs() < 0.02, "{}", s.normalized_lambda());
        let e = s.sup_limit_error().unwrap();
        assert!(e < 0.02 * p.b0(), "{e}");
    }

    #[test]
    fn eigenvalue_converges_at_second_order_in_the_mesh() {
        let p = bump(100.0);
        let fine = solve_neumann(&p, 1.0, 32000).unwrap().lambda;
        let e: Vec<f64> = [2000, 4000, 8000].iter().map(|&m| (solve_neumann(&p, 1.0, m).unwrap().lambda - fine).abs()).collect();
        let slope = crate::linalg::loglog_slope(&[2000.0, 4000.0, 8000.0], &e);
        assert!(slope < -1.7, "slope {slope}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_neumann(&bump(100.0), 0.05, 4000).is_err());
        assert!(solve_neumann(&bump(100.0), 1.0, 100).is_err());
        assert!(verify_limit_profile(&bump(1.0), 1.0, &[10.0, 5.0], 2000).is_err());
    }

    #[test]
    fn degenerate_window_is_flagged() {
        let p = PotentialSpec { r_support: 0.9, ..bump(2.0) };
        let rows = verify_limit_profile(&p, 1.0, &[2.0], 2000).unwrap();
        assert!(rows[0].empty_window);
        assert_eq!(rows[0].error, 0.0);
    }

    #[test]
    fn grid_sampling_preserves_the_integral() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let p = PotentialSpec { mode: Mode::Interval1, ..bump(1e4) };
        let w = p.sample_on_grid(&g, |_| 1.0);
        let total: f64 = w.data.iter().map(|z| z.re).sum::<f64>() * g.cell();
        assert!((total - p.b0()).abs() < 1e-3 * p.b0(), "{total}");
    }

    #[test]
    fn eigenvalue_remainder_exponent() {
        // |λ_N − 3b₀/(8πNℓ³)| ~ N^{β−2}
        let ns = [1e2, 1e3, 1e4, 1e5];
        let rem: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let s = solve_neumann(&bump(n), 1.0, 20000).unwrap();
                (s.lambda - 3.0 * s.pot.b0() / (8.0 * PI * n)).abs()
            })
            .collect();
        let slope = crate::linalg::loglog_slope(&ns, &rem);
        assert!(slope <= 0.5 - 2.0 + 0.3, "slope {slope}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn solution_is_monotone_and_bounded(v0 in 0.0f64..10.0, r in 0.2f64..1.0, logn in 1.0f64..4.0, radial in any::<bool>()) {
            let mode = if radial { Mode::Radial3 } else { Mode::Interval1 };
            let p = PotentialSpec { v0, r_support: r, beta: 0.5, n_particles: 10f64.powf(logn), mode };
            let s = solve_neumann(&p, 1.0, 2000).unwrap();
            prop_assert!(s.is_monotone());
            prop_assert!(s.lambda >= 0.0);
            prop_assert!(s.omega().iter().all(|w| (0.0..=1.0).contains(w)));
        }
    }
}
