use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use qfluct::bogokernel::{build_k, cosh_sinh, ChShMethod, Profile};
use qfluct::grid::{Field, Grid};
use qfluct::hartree::HartreeConfig;
use qfluct::linalg;
use qfluct::oracle::{self, GapRow, HypothesisReport, Scenario};
use qfluct::propagate::{compose, evolve_flow, quasifree_observables, BogoliubovPair, FlowMeta};
use qfluct::quadgen::{assemble_g2nt, assemble_g2t, block_distance, AssemblyOptions, QuadraticGenerator};
use qfluct::scattering::{solve_neumann, PotentialSpec, ScatteringSolution};
use serde::Serialize;

use crate::config::*;
use crate::manifest::{sha256_hex, Check, RunDir};
use crate::{CliError, Command};

/// A parsed and validated configuration for one subcommand.
#[derive(Clone, Debug)]
pub enum Resolved {
    Scattering(ScatteringStudy),
    Hartree(HartreeRun),
    Kernel(KernelStudy),
    Generator(GeneratorStudy),
    Flow(FlowRun),
    Oracle(OracleCompare),
    Sweep(Sweep),
}

fn read_or_default<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>, cmd: Command) -> Result<T, CliError> {
    match path {
        Some(p) => load(p, cmd.name()),
        None => Ok(T::default()),
    }
}

pub fn resolve(cmd: Command, path: Option<&Path>, workers: Option<usize>) -> Result<Resolved, CliError> {
    let r = match cmd {
        Command::ScatteringStudy => Resolved::Scattering(read_or_default(path, cmd)?),
        Command::HartreeRun => Resolved::Hartree(read_or_default(path, cmd)?),
        Command::KernelStudy => Resolved::Kernel(read_or_default(path, cmd)?),
        Command::GeneratorStudy => Resolved::Generator(read_or_default(path, cmd)?),
        Command::FlowRun => Resolved::Flow(read_or_default(path, cmd)?),
        Command::OracleCompare => Resolved::Oracle(read_or_default(path, cmd)?),
        Command::Sweep => {
            let mut s: Sweep = read_or_default(path, cmd)?;
            if let Some(w) = workers {
                s.workers = w;
            }
            Resolved::Sweep(s)
        }
    };
    r.validate()?;
    Ok(r)
}

impl Resolved {
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            Resolved::Scattering(c) => c.validate(),
            Resolved::Hartree(c) => c.validate(),
            Resolved::Kernel(c) => c.validate(),
            Resolved::Generator(c) => c.validate(),
            Resolved::Flow(c) => c.validate(),
            Resolved::Oracle(c) => c.validate(),
            Resolved::Sweep(c) => c.validate(),
        }
    }

    pub fn to_value(&self) -> Result<serde_json::Value, CliError> {
        let v = match self {
            Resolved::Scattering(c) => serde_json::to_value(c),
            Resolved::Hartree(c) => serde_json::to_value(c),
            Resolved::Kernel(c) => serde_json::to_value(c),
            Resolved::Generator(c) => serde_json::to_value(c),
            Resolved::Flow(c) => serde_json::to_value(c),
            Resolved::Oracle(c) => serde_json::to_value(c),
            Resolved::Sweep(c) => serde_json::to_value(c),
        };
        v.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn execute(&self, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
        match self {
            Resolved::Scattering(c) => scattering_study(c, rd),
            Resolved::Hartree(c) => hartree_run(c, rd),
            Resolved::Kernel(c) => kernel_study(c, rd),
            Resolved::Generator(c) => generator_study(c, rd),
            Resolved::Flow(c) => flow_run(c, rd),
            Resolved::Oracle(c) => oracle_compare(c, rd),
            Resolved::Sweep(c) => sweep(c, rd),
        }
    }
}

/// max/min of positive values; an all-zero column counts as flat.
pub fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        1.0
    } else {
        max / min
    }
}

/// Non-increasing, allowing at most one rise within `rel` of the larger
/// neighbour.
pub fn nonincreasing_with_slack(xs: &[f64], rel: f64) -> bool {
    let mut inversions = 0;
    for w in xs.windows(2) {
        if w[1] > w[0] {
            if w[1] - w[0] > rel * w[1] {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

fn count_failures(xs: &[bool]) -> f64 {
    xs.iter().filter(|b| !**b).count() as f64
}

// ---------------------------------------------------------------- scattering

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringRow {
    pub n: f64,
    pub lambda: f64,
    pub normalized_lambda: f64,
    pub lambda_error: f64,
    pub sup_omega_bound: f64,
    pub sup_gradient_bound: f64,
    pub limit_error: f64,
    pub limit_window_empty: bool,
}

pub fn scattering_row(pot: &PotentialSpec, ell: f64, mesh: usize) -> Result<ScatteringRow, CliError> {
    let s = solve_neumann(pot, ell, mesh)?;
    let (norm, err) = if pot.b0() == 0.0 { (0.0, 0.0) } else { (s.normalized_lambda(), (s.normalized_lambda() - 1.0).abs()) };
    let lim = s.sup_limit_error();
    Ok(ScatteringRow {
        n: pot.n_particles,
        lambda: s.lambda,
        normalized_lambda: norm,
        lambda_error: err,
        sup_omega_bound: s.sup_omega_bound(),
        sup_gradient_bound: s.sup_gradient_bound(),
        limit_error: lim.unwrap_or(0.0),
        limit_window_empty: lim.is_none(),
    })
}

fn scattering_study(c: &ScatteringStudy, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
    let rows = c
        .n_list
        .iter()
        .map(|&n| scattering_row(&c.potential.spec(n), c.ell, c.mesh_points))
        .collect::<Result<Vec<_>, _>>()?;
    rd.mark("solve");
    rd.write_csv("scattering.csv", &rows)?;
    let mut checks = Vec::new();
    if let Some(max) = c.checks.lambda_error_max {
        let errs: Vec<f64> = rows.iter().map(|r| r.lambda_error).collect();
        checks.push(Check::at_most("lambda_error_final", *errs.last().unwrap(), max));
        let mono = errs.windows(2).all(|w| w[1] <= w[0]);
        checks.push(Check::holds("lambda_error_monotone", count_failures(&[mono]), mono, "non-increasing"));
    }
    if let Some(max) = c.checks.bound_spread_max {
        let om: Vec<f64> = rows.iter().map(|r| r.sup_omega_bound).collect();
        let gr: Vec<f64> = rows.iter().map(|r| r.sup_gradient_bound).collect();
        checks.push(Check::at_most("omega_bound_spread", spread(&om), max));
        checks.push(Check::at_most("gradient_bound_spread", spread(&gr), max));
    }
    if c.checks.limit_error_decreasing {
        let e: Vec<f64> = rows.iter().filter(|r| !r.limit_window_empty).map(|r| r.limit_error).collect();
        let ok = e.len() >= 2 && e.windows(2).all(|w| w[1] < w[0]);
        checks.push(Check::holds("limit_error_decreasing", e.last().copied().unwrap_or(f64::NAN), ok, "strictly decreasing"));
    }
    Ok(checks)
}

// ------------------------------------------------------------------- hartree

fn hartree_config(c: &HartreeRun, grid: Grid, dt: f64) -> Result<HartreeConfig, CliError> {
    let spec = c.potential.spec(c.n);
    let cfg = match c.interaction {
        InteractionCfg::Modified => {
            let s = solve_neumann(&spec, c.ell, c.mesh_points)?;
            HartreeConfig::modified(grid, &spec, Some(&s), dt)?
        }
        InteractionCfg::Bare => HartreeConfig::modified(grid, &spec, None, dt)?,
        InteractionCfg::Contact { sigma } => HartreeConfig::contact(grid, sigma.unwrap_or(spec.b0()), dt)?,
    };
    Ok(cfg)
}

#[derive(Serialize)]
struct OrderRow {
    dt: f64,
    self_difference: f64,
}

fn hartree_run(c: &HartreeRun, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
    let grid = c.grid.build("grid")?;
    let phi0 = c.condensate.build(grid);
    let hc = hartree_config(c, grid, c.dt)?;
    let traj = hc.evolve(&phi0, c.t_final, c.sample_every, false)?;
    rd.mark("evolve");
    rd.write_csv("diagnostics.csv", &traj.diagnostics)?;
    let mut buf = Vec::new();
    traj.final_field().write_snapshot(&mut buf)?;
    rd.write_bytes("final_field.cfld", &buf)?;

    let mut checks = Vec::new();
    if let Some(max) = c.checks.mass_drift_max {
        checks.push(Check::at_most("mass_drift", traj.mass_drift(), max));
    }
    if let Some(max) = c.checks.energy_drift_max {
        checks.push(Check::at_most("energy_drift", traj.energy_drift(), max));
    }
    if let Some(band) = c.checks.order_slope {
        let mut rows = Vec::new();
        for &dt in &c.checks.order_dts {
            let a = hartree_config(c, grid, dt)?.evolve(&phi0, c.t_final, usize::MAX, false)?;
            let b = hartree_config(c, grid, dt / 2.0)?.evolve(&phi0, c.t_final, usize::MAX, false)?;
            rows.push(OrderRow { dt, self_difference: a.final_field().sub(b.final_field()).norm() });
        }
        rd.mark("order");
        rd.write_csv("order.csv", &rows)?;
        let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.self_difference).collect();
        checks.push(Check::within("order_slope", linalg::loglog_slope(&dts, &errs), band.target, band.tol));
    }
    Ok(checks)
}

// -------------------------------------------------------------------- kernel

/// Scattering solution and φ_{N,t} by the modified Hartree flow.
pub fn evolved_condensate(
    grid: Grid,
    pot: &PotentialSpec,
    ell: f64,
    mesh: usize,
    phi0: &Field,
    t: f64,
    dt: f64,
) -> Result<(ScatteringSolution, HartreeConfig, Field), CliError> {
    let s = solve_neumann(pot, ell, mesh)?;
    let hc = HartreeConfig::modified(grid, pot, Some(&s), dt)?;
    let phi = hc.evolve(phi0, t, usize::MAX, false)?.final_field().clone();
    Ok((s, hc, phi))
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelRow {
    pub n: f64,
    pub k_hs: f64,
    pub grad_k_hs: f64,
    pub ch_defect: f64,
    pub sh_defect: f64,
}

fn kernel_study(c: &KernelStudy, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
    let grid = c.grid.build("grid")?;
    let phi0 = c.condensate.build(grid);
    let mut rows = Vec::new();
    let mut last = None;
    for &n in &c.n_list {
        let (s, _, phi) = evolved_condensate(grid, &c.potential.spec(n), c.ell, c.mesh_points, &phi0, c.t, c.dt)?;
        let (k, k_raw) = build_k(&Profile::from_scattering(&s), &phi, c.project)?;
        let pack = cosh_sinh(&k, &k_raw, ChShMethod::Auto)?;
        let (ch_defect, sh_defect) = pack.identity_defects();
        rows.push(KernelRow { n, k_hs: k.hs_norm(), grad_k_hs: k.grad_hs_norm(), ch_defect, sh_defect });
        last = Some(k);
    }
    rd.mark("kernels");
    rd.write_csv("kernels.csv", &rows)?;
    if let Some(k) = last {
        let mut buf = Vec::new();
        k.write_dump(&mut buf)?;
        rd.write_bytes("kernel_last.ckrn", &buf)?;
    }
    let mut checks = Vec::new();
    if let Some(max) = c.checks.hs_spread_max {
        let hs: Vec<f64> = rows.iter().map(|r| r.k_hs).collect();
        checks.push(Check::at_most("k_hs_spread", spread(&hs), max));
    }
    if let Some(band) = c.checks.grad_exponent {
        let ns: Vec<f64> = rows.iter().map(|r| r.n).collect();
        let g: Vec<f64> = rows.iter().map(|r| r.grad_k_hs).collect();
        checks.push(Check::within("grad_k_exponent", linalg::loglog_slope(&ns, &g), band.target, band.tol));
    }
    if let Some(max) = c.checks.identity_defect_max {
        let d = rows.iter().map(|r| r.ch_defect.max(r.sh_defect)).fold(0.0, f64::max);
        checks.push(Check::at_most("identity_defect", d, max));
    }
    Ok(checks)
}

// ----------------------------------------------------------------- generator

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorRow {
    pub n: f64,
    pub hermiticity: f64,
    pub eta: f64,
    pub eta_imag: f64,
    pub c_t: f64,
    pub block_distance: f64,
}

pub fn hermiticity(asm: &qfluct::quadgen::Assembled) -> f64 {
    let (ra, rb, _) = asm.gen.invariant_residuals();
    asm.residual.max(asm.t_residual).max(ra).max(rb)
}

fn generator_study(c: &GeneratorStudy, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
    let grid = c.grid.build("grid")?;
    let phi0 = c.condensate.build(grid);
    let opts = AssemblyOptions { project: c.project, ..AssemblyOptions::default() };
    let b0 = c.potential.spec(1.0).b0();
    let nls = HartreeConfig::contact(grid, b0, c.dt)?;
    let phi_inf = nls.evolve(&phi0, c.t, usize::MAX, false)?.final_field().clone();
    let lim = assemble_g2t(&phi_inf, &nls.time_derivative(&phi_inf), b0, c.ell, &opts, c.t)?;
    let mut rows = Vec::new();
    for &n in &c.n_list {
        let (s, hc, phi) = evolved_condensate(grid, &c.potential.spec(n), c.ell, c.mesh_points, &phi0, c.t, c.dt)?;
        let asm = assemble_g2nt(&phi, &hc.time_derivative(&phi), &s, &opts, c.t)?;
        rows.push(GeneratorRow {
            n,
            hermiticity: hermiticity(&asm),
            eta: asm.eta,
            eta_imag: (asm.gen.c.im).abs(),
            c_t: asm.c_t,
            block_distance: block_distance(&asm.gen, &lim.gen),
        });
    }
    rd.mark("assemble");
    rd.write_csv("generators.csv", &rows)?;
    let mut buf = Vec::new();
    lim.gen.write_dump(&mut buf)?;
    rd.write_bytes("limit_generator.cgen", &buf)?;
    let mut checks = Vec::new();
    if let Some(max) = c.checks.hermiticity_max {
        checks.push(Check::at_most("hermiticity_residual", rows.iter().map(|r| r.hermiticity).fold(0.0, f64::max), max));
    }
    if let Some(max) = c.checks.eta_imag_max {
        checks.push(Check::at_most("eta_imaginary_part", rows.iter().map(|r| r.eta_imag).fold(0.0, f64::max), max));
    }
    if c.checks.block_distance_decreasing {
        let d: Vec<f64> = rows.iter().map(|r| r.block_distance).collect();
        let ok = d.windows(2).all(|w| w[1] < w[0]);
        checks.push(Check::holds("block_distance_decreasing", *d.last().unwrap(), ok, "strictly decreasing"));
    }
    Ok(checks)
}

// ---------------------------------------------------------------------- flow

#[derive(Serialize)]
struct FlowRow {
    t: f64,
    symplectic_defect: f64,
    n_expect: f64,
}

fn flow_run(c: &FlowRun, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
    let grid = c.grid.build("grid")?;
    let phi0 = c.condensate.build(grid);
    let pot = c.potential.spec(c.n);
    let s = solve_neumann(&pot, c.ell, c.mesh_points)?;
    // condensate on the half-step lattice, so every Magnus midpoint is a sample
    let half = c.dt / 2.0;
    let hc = HartreeConfig::modified(grid, &pot, Some(&s), half)?;
    let traj = hc.evolve(&phi0, c.t_final, 1, true)?;
    let opts = AssemblyOptions { project: c.project, ..AssemblyOptions::default() };
    let mut gen = |t: f64| -> qfluct::Result<QuadraticGenerator> {
        let i = (t / half).round() as usize;
        let phi = &traj.fields[i.min(traj.fields.len() - 1)];
        Ok(assemble_g2nt(phi, &hc.time_derivative(phi), &s, &opts, t)?.gen)
    };
    let m = grid.n_sites();
    let steps = (c.t_final / c.dt).round() as usize;
    let mut pair = BogoliubovPair::identity(m);
    let mut rows = vec![FlowRow { t: 0.0, symplectic_defect: 0.0, n_expect: 0.0 }];
    let mut done = 0;
    let mut worst = 0.0f64;
    while done < steps {
        let chunk = c.record_every.min(steps - done);
        let (t0, t1) = (done as f64 * c.dt, (done + chunk) as f64 * c.dt);
        let piece = evolve_flow(&mut gen, m, t0, t1, c.dt, 1e-6)?;
        pair = compose(&piece, &pair)?;
        done += chunk;
        let defect = pair.symplectic_defect();
        worst = worst.max(defect);
        rows.push(FlowRow { t: t1, symplectic_defect: defect, n_expect: quasifree_observables(&pair).n_expect });
    }
    rd.mark("flow");
    rd.write_csv("flow.csv", &rows)?;
    let hash = sha256_hex(serde_json::to_string(c).unwrap_or_default().as_bytes());
    let meta = FlowMeta { t0: 0.0, t1: c.t_final, dt: c.dt, generator_hash: u64::from_str_radix(&hash[..16], 16).unwrap_or(0) };
    let mut buf = Vec::new();
    pair.write_checkpoint(&mut buf, &meta)?;
    rd.write_bytes("flow_final.cflw", &buf)?;
    let mut checks = Vec::new();
    if let Some(max) = c.checks.symplectic_defect_max {
        checks.push(Check::at_most("symplectic_defect", worst, max));
    }
    Ok(checks)
}

// -------------------------------------------------------------------- oracle

/// Gap series and hypothesis report of one oracle scenario.
pub struct OracleResult {
    pub rows: Vec<GapRow>,
    pub hypothesis: HypothesisReport,
    pub norm_defect: f64,
    pub max_leak: f64,
}

pub fn run_oracle(c: &OracleCompare) -> Result<OracleResult, CliError> {
    let sc = Scenario::new(&c.scenario)?;
    let series = oracle::norm_gaps(&sc, c.sample_every)?;
    let hypothesis = oracle::hypothesis_check(&sc)?;
    Ok(OracleResult { rows: series.rows, hypothesis, norm_defect: series.norm_defect, max_leak: series.max_leak })
}

fn oracle_checks(c: &OracleChecks, r: &OracleResult) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(max) = c.norm_defect_max {
        checks.push(Check::at_most("norm_defect", r.norm_defect, max));
    }
    if c.phase_beats_ablation {
        let last = r.rows.last().unwrap();
        let ok = last.gap_thm2 <= last.gap_thm2_no_phase;
        checks.push(Check::holds("phase_beats_ablation", last.gap_thm2 - last.gap_thm2_no_phase, ok, "<= 0"));
    }
    checks
}

fn oracle_compare(c: &OracleCompare, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
    let r = run_oracle(c)?;
    rd.mark("oracle");
    rd.write_csv("gaps.csv", &r.rows)?;
    rd.write_csv("hypothesis.csv", std::slice::from_ref(&r.hypothesis))?;
    Ok(oracle_checks(&c.checks, &r))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrendRow {
    pub n: usize,
    pub n_max: usize,
    pub gap_thm1: f64,
    pub gap_thm2: f64,
    pub gap_thm2_no_phase: f64,
    pub gap_initial: f64,
    pub n_a_n: f64,
    pub n_b_n: f64,
    pub kn_input: f64,
    pub kn_recovered: f64,
    pub norm_defect: f64,
    pub max_leak: f64,
}

fn sweep(c: &Sweep, rd: &mut RunDir) -> Result<Vec<Check>, CliError> {
    let jobs: Vec<OracleCompare> = c.n_list.iter().map(|&n| c.scenario_for(n)).collect();
    let results: Vec<Mutex<Option<Result<OracleResult, CliError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..c.workers.min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let r = run_oracle(&jobs[i]);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    rd.mark("oracle runs");
    let mut trend = Vec::new();
    let mut per_run = Vec::new();
    for (job, slot) in jobs.iter().zip(results) {
        let r = slot.into_inner().unwrap().expect("every job ran")?;
        let n = job.scenario.n;
        rd.write_csv(&format!("n{n}/gaps.csv"), &r.rows)?;
        rd.write_csv(&format!("n{n}/hypothesis.csv"), std::slice::from_ref(&r.hypothesis))?;
        let (first, last) = (r.rows.first().unwrap(), r.rows.last().unwrap());
        let nf = n as f64;
        trend.push(TrendRow {
            n,
            n_max: job.scenario.n_max,
            gap_thm1: last.gap_thm1,
            gap_thm2: last.gap_thm2,
            gap_thm2_no_phase: last.gap_thm2_no_phase,
            gap_initial: first.gap_thm1,
            n_a_n: nf * r.hypothesis.a_n,
            n_b_n: nf * r.hypothesis.b_n,
            kn_input: r.hypothesis.kn_input,
            kn_recovered: r.hypothesis.kn_recovered,
            norm_defect: r.norm_defect,
            max_leak: r.max_leak,
        });
        per_run.push(oracle_checks(&job.checks, &r));
    }
    rd.write_csv("trend.csv", &trend)?;

    let mut checks = Vec::new();
    for (n, cs) in c.n_list.iter().zip(per_run) {
        for mut ch in cs {
            ch.name = format!("n{n}.{}", ch.name);
            checks.push(ch);
        }
    }
    let gaps: Vec<f64> = trend.iter().map(|r| r.gap_thm1).collect();
    if let Some(rel) = c.checks.gap_monotone {
        let ok = nonincreasing_with_slack(&gaps, rel);
        checks.push(Check::holds("gap_monotone", *gaps.last().unwrap(), ok, &format!("non-increasing, one inversion within {rel}")));
    }
    if c.checks.phase_beats_ablation {
        let wins: Vec<bool> = trend.iter().map(|r| r.gap_thm2 <= r.gap_thm2_no_phase).collect();
        checks.push(Check::holds("phase_beats_ablation", count_failures(&wins), wins.iter().all(|b| *b), "0 losing runs"));
    }
    if let Some(max) = c.checks.hypothesis_spread_max {
        let a: Vec<f64> = trend.iter().map(|r| r.n_a_n).collect();
        let b: Vec<f64> = trend.iter().map(|r| r.n_b_n).collect();
        checks.push(Check::at_most("n_a_spread", spread(&a), max));
        checks.push(Check::at_most("n_b_spread", spread(&b), max));
    }
    if let Some(max) = c.checks.round_trip_max {
        let worst = trend
            .iter()
            .map(|r| if r.kn_input == 0.0 { r.kn_recovered.abs() } else { (r.kn_recovered / r.kn_input - 1.0).abs() })
            .fold(0.0, f64::max);
        checks.push(Check::at_most("round_trip", worst, max));
    }
    Ok(checks)
}
