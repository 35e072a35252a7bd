//! Run configurations. Every field has a default, unknown keys are
//! rejected, and validation errors name the offending field path.

use std::path::Path;

use qfluct::grid::{Field, Grid};
use qfluct::hartree::{gaussian_bump, two_bump};
use qfluct::oracle::ScenarioConfig;
use qfluct::scattering::{Mode, PotentialSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn bad<T>(path: &str, msg: impl std::fmt::Display) -> Result<T, CliError> {
    Err(CliError::Config(format!("{path}: {msg}")))
}

/// Parse JSON into `T`, reporting the path of the first bad field.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })
}

/// Reads a config file. A manifest written by an earlier run is accepted
/// too, in which case its resolved config is replayed.
pub fn load<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let (Some(cmd), Some(cfg)) = (value.get("command"), value.get("config")) {
        if value.get("run_id").is_some() {
            if cmd.as_str() != Some(command) {
                return bad("command", format!("manifest was written by {cmd}, not {command}"));
            }
            return parse(&cfg.to_string());
        }
    }
    parse(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridCfg {
    pub d: usize,
    pub m: usize,
    pub l: f64,
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg { d: 1, m: 128, l: 16.0 }
    }
}

impl GridCfg {
    pub fn build(&self, path: &str) -> Result<Grid, CliError> {
        Grid::new(self.d, self.m, self.l).map_err(|e| CliError::Config(format!("{path}: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialCfg {
    pub v0: f64,
    pub r_support: f64,
    pub beta: f64,
    pub mode: Mode,
}

impl Default for PotentialCfg {
    fn default() -> Self {
        PotentialCfg { v0: 1.0, r_support: 1.0, beta: 0.5, mode: Mode::Radial3 }
    }
}

impl PotentialCfg {
    pub fn spec(&self, n: f64) -> PotentialSpec {
        PotentialSpec { v0: self.v0, r_support: self.r_support, beta: self.beta, n_particles: n, mode: self.mode }
    }

    fn validate(&self, path: &str) -> Result<(), CliError> {
        self.spec(1.0).validate().map_err(|e| CliError::Config(format!("{path}: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Gaussian,
    TwoBump,
}

/// Initial condensate φ₀.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CondensateCfg {
    pub shape: Shape,
    pub width: f64,
    /// Momentum along the first axis (Gaussian shape only).
    pub momentum: f64,
}

impl Default for CondensateCfg {
    fn default() -> Self {
        CondensateCfg { shape: Shape::Gaussian, width: 1.5, momentum: 0.5 }
    }
}

impl CondensateCfg {
    pub fn build(&self, grid: Grid) -> Field {
        match self.shape {
            Shape::Gaussian => gaussian_bump(grid, [grid.l / 2.0; 3], self.width, self.momentum),
            Shape::TwoBump => two_bump(grid, self.width),
        }
    }

    fn validate(&self, path: &str) -> Result<(), CliError> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return bad(&format!("{path}.width"), "must be positive");
        }
        Ok(())
    }
}

fn check_grid_mode(grid: &GridCfg, pot: &PotentialCfg) -> Result<(), CliError> {
    if grid.d != pot.mode.dim() {
        return bad("potential.mode", format!("{:?} needs d = {}, grid has d = {}", pot.mode, pot.mode.dim(), grid.d));
    }
    Ok(())
}

fn check_n_list(ns: &[f64]) -> Result<(), CliError> {
    if ns.is_empty() {
        return bad("n_list", "must not be empty");
    }
    if ns.iter().any(|n| !(*n >= 1.0 && n.is_finite())) {
        return bad("n_list", "entries must be finite and >= 1");
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return bad("n_list", "must be strictly increasing");
    }
    Ok(())
}

fn check_time(t_final: f64, dt: f64, path: &str) -> Result<(), CliError> {
    if !(dt > 0.0 && t_final >= 0.0) {
        return bad(path, "dt must be positive and t_final non-negative");
    }
    let steps = t_final / dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return bad(path, format!("t_final = {t_final} is not a multiple of dt = {dt}"));
    }
    Ok(())
}

/// Target and half-width for a fitted exponent or slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub target: f64,
    pub tol: f64,
}

// ---------------------------------------------------------------- scattering

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringChecks {
    /// Bound on |normalized λ − 1| at the largest N, and monotone decrease.
    pub lambda_error_max: Option<f64>,
    /// Largest max/min ratio of each ω bound across the sweep.
    pub bound_spread_max: Option<f64>,
    /// Strict decrease of the limit-profile error.
    pub limit_error_decreasing: bool,
}

impl Default for ScatteringChecks {
    fn default() -> Self {
        ScatteringChecks { lambda_error_max: Some(0.05), bound_spread_max: Some(3.0), limit_error_decreasing: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringStudy {
    pub potential: PotentialCfg,
    pub ell: f64,
    pub mesh_points: usize,
    pub n_list: Vec<f64>,
    pub checks: ScatteringChecks,
}

impl Default for ScatteringStudy {
    fn default() -> Self {
        ScatteringStudy {
            potential: PotentialCfg::default(),
            ell: 1.0,
            mesh_points: 20000,
            n_list: vec![1e2, 1e3, 1e4, 1e5],
            checks: ScatteringChecks::default(),
        }
    }
}

impl ScatteringStudy {
    pub fn validate(&self) -> Result<(), CliError> {
        self.potential.validate("potential")?;
        if !(self.ell > 0.0) {
            return bad("ell", "must be positive");
        }
        if self.mesh_points < 2000 {
            return bad("mesh_points", format!("{} < 2000", self.mesh_points));
        }
        check_n_list(&self.n_list)
    }
}

// ------------------------------------------------------------------- hartree

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum InteractionCfg {
    /// Kernel V_N f_N from the scattering solution.
    Modified,
    /// Bare V_N.
    Bare,
    /// σ|φ|²; σ defaults to b₀.
    Contact { sigma: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HartreeChecks {
    pub mass_drift_max: Option<f64>,
    pub energy_drift_max: Option<f64>,
    /// Self-convergence slope over `order_dts` (each compared with dt/2).
    pub order_slope: Option<Band>,
    pub order_dts: Vec<f64>,
}

impl Default for HartreeChecks {
    fn default() -> Self {
        HartreeChecks {
            mass_drift_max: Some(1e-10),
            energy_drift_max: Some(1e-6),
            order_slope: None,
            order_dts: vec![4e-3, 2e-3, 1e-3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HartreeRun {
    pub grid: GridCfg,
    pub potential: PotentialCfg,
    pub n: f64,
    pub ell: f64,
    pub mesh_points: usize,
    pub interaction: InteractionCfg,
    pub condensate: CondensateCfg,
    pub t_final: f64,
    pub dt: f64,
    pub sample_every: usize,
    pub checks: HartreeChecks,
}

impl Default for HartreeRun {
    fn default() -> Self {
        HartreeRun {
            grid: GridCfg { d: 1, m: 256, l: 16.0 },
            potential: PotentialCfg { v0: 5.0, mode: Mode::Interval1, ..PotentialCfg::default() },
            n: 1000.0,
            ell: 1.0,
            mesh_points: 4000,
            interaction: InteractionCfg::Modified,
            condensate: CondensateCfg::default(),
            t_final: 1.0,
            dt: 1e-3,
            sample_every: 10,
            checks: HartreeChecks::default(),
        }
    }
}

impl HartreeRun {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.build("grid")?;
        self.potential.validate("potential")?;
        check_grid_mode(&self.grid, &self.potential)?;
        self.condensate.validate("condensate")?;
        if !(self.n >= 1.0) {
            return bad("n", "must be >= 1");
        }
        if self.mesh_points < 2000 {
            return bad("mesh_points", format!("{} < 2000", self.mesh_points));
        }
        if self.sample_every == 0 {
            return bad("sample_every", "must be positive");
        }
        check_time(self.t_final, self.dt, "dt")?;
        if self.checks.order_slope.is_some() {
            if self.checks.order_dts.len() < 2 {
                return bad("checks.order_dts", "need at least two step sizes");
            }
            for (i, &dt) in self.checks.order_dts.iter().enumerate() {
                check_time(self.t_final, dt / 2.0, &format!("checks.order_dts[{i}]"))?;
            }
        }
        Ok(())
    }
}

// -------------------------------------------------------------------- kernel

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelChecks {
    pub hs_spread_max: Option<f64>,
    pub grad_exponent: Option<Band>,
    pub identity_defect_max: Option<f64>,
}

impl Default for KernelChecks {
    fn default() -> Self {
        KernelChecks { hs_spread_max: Some(2.0), grad_exponent: None, identity_defect_max: Some(1e-10) }
    }
}

/// Condensate evolved by the modified Hartree flow to time `t` for each N,
/// then the pair kernel k_{N,t} and its derived operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelStudy {
    pub grid: GridCfg,
    pub potential: PotentialCfg,
    pub ell: f64,
    pub mesh_points: usize,
    pub n_list: Vec<f64>,
    pub condensate: CondensateCfg,
    pub t: f64,
    pub dt: f64,
    pub project: bool,
    pub checks: KernelChecks,
}

impl Default for KernelStudy {
    fn default() -> Self {
        KernelStudy {
            grid: GridCfg { d: 1, m: 128, l: 16.0 },
            potential: PotentialCfg { v0: 5.0, mode: Mode::Interval1, ..PotentialCfg::default() },
            ell: 1.0,
            mesh_points: 4000,
            n_list: (6..=12).map(|e| f64::powi(2.0, e)).collect(),
            condensate: CondensateCfg::default(),
            t: 0.2,
            dt: 1e-3,
            project: true,
            checks: KernelChecks::default(),
        }
    }
}

impl KernelStudy {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.build("grid")?;
        self.potential.validate("potential")?;
        check_grid_mode(&self.grid, &self.potential)?;
        self.condensate.validate("condensate")?;
        if !(self.ell > 0.0 && self.ell < self.grid.l / 4.0) {
            return bad("ell", "must lie in (0, grid.l/4)");
        }
        if self.mesh_points < 2000 {
            return bad("mesh_points", format!("{} < 2000", self.mesh_points));
        }
        check_time(self.t, self.dt, "dt")?;
        check_n_list(&self.n_list)
    }
}

// ----------------------------------------------------------------- generator

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorChecks {
    pub hermiticity_max: Option<f64>,
    pub eta_imag_max: Option<f64>,
    pub block_distance_decreasing: bool,
}

impl Default for GeneratorChecks {
    fn default() -> Self {
        GeneratorChecks { hermiticity_max: Some(1e-6), eta_imag_max: Some(1e-10), block_distance_decreasing: true }
    }
}

/// 𝒢_{2,N,t} along the modified Hartree flow against the limiting
/// generator along the contact flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorStudy {
    pub grid: GridCfg,
    pub potential: PotentialCfg,
    pub ell: f64,
    pub mesh_points: usize,
    pub n_list: Vec<f64>,
    pub condensate: CondensateCfg,
    pub t: f64,
    pub dt: f64,
    pub project: bool,
    pub checks: GeneratorChecks,
}

impl Default for GeneratorStudy {
    fn default() -> Self {
        GeneratorStudy {
            grid: GridCfg { d: 1, m: 64, l: 8.0 },
            potential: PotentialCfg { v0: 5.0, mode: Mode::Interval1, ..PotentialCfg::default() },
            ell: 1.0,
            mesh_points: 4000,
            n_list: (6..=10).map(|e| f64::powi(2.0, e)).collect(),
            condensate: CondensateCfg::default(),
            t: 0.2,
            dt: 1e-3,
            project: true,
            checks: GeneratorChecks::default(),
        }
    }
}

impl GeneratorStudy {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.build("grid")?;
        self.potential.validate("potential")?;
        check_grid_mode(&self.grid, &self.potential)?;
        self.condensate.validate("condensate")?;
        if !(self.ell > 0.0 && self.ell < self.grid.l / 4.0) {
            return bad("ell", "must lie in (0, grid.l/4)");
        }
        if self.mesh_points < 2000 {
            return bad("mesh_points", format!("{} < 2000", self.mesh_points));
        }
        check_time(self.t, self.dt, "dt")?;
        check_n_list(&self.n_list)
    }
}

// ---------------------------------------------------------------------- flow

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowChecks {
    pub symplectic_defect_max: Option<f64>,
}

impl Default for FlowChecks {
    fn default() -> Self {
        FlowChecks { symplectic_defect_max: Some(1e-8) }
    }
}

/// Bogoliubov flow of 𝒢_{2,N,t} along the modified Hartree trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowRun {
    pub grid: GridCfg,
    pub potential: PotentialCfg,
    pub n: f64,
    pub ell: f64,
    pub mesh_points: usize,
    pub condensate: CondensateCfg,
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    pub project: bool,
    pub checks: FlowChecks,
}

impl Default for FlowRun {
    fn default() -> Self {
        FlowRun {
            grid: GridCfg { d: 1, m: 32, l: 8.0 },
            potential: PotentialCfg { v0: 5.0, mode: Mode::Interval1, ..PotentialCfg::default() },
            n: 256.0,
            ell: 1.0,
            mesh_points: 4000,
            condensate: CondensateCfg::default(),
            t_final: 0.2,
            dt: 1e-2,
            record_every: 5,
            project: true,
            checks: FlowChecks::default(),
        }
    }
}

impl FlowRun {
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.build("grid")?;
        self.potential.validate("potential")?;
        check_grid_mode(&self.grid, &self.potential)?;
        self.condensate.validate("condensate")?;
        if !(self.n >= 1.0) {
            return bad("n", "must be >= 1");
        }
        if !(self.ell > 0.0 && self.ell < self.grid.l / 4.0) {
            return bad("ell", "must lie in (0, grid.l/4)");
        }
        if self.mesh_points < 2000 {
            return bad("mesh_points", format!("{} < 2000", self.mesh_points));
        }
        if self.record_every == 0 {
            return bad("record_every", "must be positive");
        }
        check_time(self.t_final, self.dt, "dt")
    }
}

// -------------------------------------------------------------------- oracle

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleChecks {
    pub norm_defect_max: Option<f64>,
    /// Final phased gap ≤ final phase-ablated gap.
    pub phase_beats_ablation: bool,
}

impl Default for OracleChecks {
    fn default() -> Self {
        OracleChecks { norm_defect_max: Some(1e-8), phase_beats_ablation: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleCompare {
    pub scenario: ScenarioConfig,
    pub sample_every: usize,
    pub checks: OracleChecks,
}

impl Default for OracleCompare {
    fn default() -> Self {
        OracleCompare { scenario: ScenarioConfig::default(), sample_every: 10, checks: OracleChecks::default() }
    }
}

impl OracleCompare {
    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario.validate().map_err(|e| CliError::Config(format!("scenario.{}", strip_config_prefix(&e))))?;
        if self.sample_every == 0 {
            return bad("sample_every", "must be positive");
        }
        Ok(())
    }
}

fn strip_config_prefix(e: &qfluct::Error) -> String {
    match e {
        qfluct::Error::Config(s) => s.clone(),
        other => format!(" {other}"),
    }
}

// --------------------------------------------------------------------- sweep

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepChecks {
    /// Final gap non-increasing in N, allowing one inversion within this
    /// relative margin.
    pub gap_monotone: Option<f64>,
    pub phase_beats_ablation: bool,
    /// max/min of N·a_N and of N·b_N.
    pub hypothesis_spread_max: Option<f64>,
    /// Relative mismatch of ⟨ξ,(𝒦+𝒩)ξ⟩ after the round trip.
    pub round_trip_max: Option<f64>,
}

impl Default for SweepChecks {
    fn default() -> Self {
        SweepChecks {
            gap_monotone: Some(0.05),
            phase_beats_ablation: true,
            hypothesis_spread_max: Some(4.0),
            round_trip_max: Some(0.1),
        }
    }
}

/// Replays oracle-compare for each N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub base: OracleCompare,
    pub n_list: Vec<usize>,
    /// If set, n_max = N + offset for each run.
    pub n_max_offset: Option<usize>,
    pub workers: usize,
    pub checks: SweepChecks,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            base: OracleCompare::default(),
            n_list: vec![2, 3, 4, 5, 6],
            n_max_offset: Some(4),
            workers: 2,
            checks: SweepChecks::default(),
        }
    }
}

impl Sweep {
    pub fn scenario_for(&self, n: usize) -> OracleCompare {
        let mut c = self.base.clone();
        c.scenario.n = n;
        if let Some(off) = self.n_max_offset {
            c.scenario.n_max = n + off;
        }
        c
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_list.is_empty() {
            return bad("n_list", "must not be empty");
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("n_list", "must be strictly increasing");
        }
        if self.workers == 0 {
            return bad("workers", "must be positive");
        }
        for (i, &n) in self.n_list.iter().enumerate() {
            self.scenario_for(n)
                .validate()
                .map_err(|e| CliError::Config(format!("n_list[{i}] -> base.{}", e.message())))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScatteringStudy::default().validate().unwrap();
        HartreeRun::default().validate().unwrap();
        KernelStudy::default().validate().unwrap();
        GeneratorStudy::default().validate().unwrap();
        FlowRun::default().validate().unwrap();
        OracleCompare::default().validate().unwrap();
        Sweep::default().validate().unwrap();
    }

    #[test]
    fn unknown_field_reports_its_path() {
        let e = parse::<HartreeRun>(r#"{"grid": {"m": 64, "size": 3}}"#).unwrap_err();
        assert!(e.message().starts_with("grid"), "{}", e.message());
        let e = parse::<OracleCompare>(r#"{"scenario": {"n": "four"}}"#).unwrap_err();
        assert!(e.message().starts_with("scenario.n"), "{}", e.message());
    }

    #[test]
    fn validation_names_fields() {
        let mut c = HartreeRun::default();
        c.grid.d = 3;
        assert!(c.validate().unwrap_err().message().starts_with("potential.mode"));
        let mut o = OracleCompare::default();
        o.scenario.ell = 100.0;
        assert!(o.validate().unwrap_err().message().starts_with("scenario.ell"));
        let s = Sweep { n_list: vec![2, 9], ..Sweep::default() };
        assert!(s.validate().unwrap_err().message().starts_with("n_list[1]"));
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: ScatteringStudy = parse(r#"{"n_list": [10, 100]}"#).unwrap();
        assert_eq!(c.ell, 1.0);
        assert_eq!(c.n_list, vec![10.0, 100.0]);
        let s: Sweep = parse(r#"{"base": {"scenario": {"xi": {"kind": "pair", "amplitude": 0.3}}}}"#).unwrap();
        assert_eq!(s.scenario_for(5).scenario.n_max, 9);
    }
}
