//! Single solves, ε-sweeps and verification of stored fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wavemap_core::diagnostics::{
    apriori_bounds, calibrate_bounds, dual_pairing, energy_identity_residual, energy_trace, fit_affine,
    initial_trace_defect, initial_velocity_recovery, physical_energy, standard_test_fields, weak_wave_residual,
    IdentityResidual, PhysicalEnergy, WeakResidual, WeakTestFamily, BOUND_TOL,
};
use wavemap_core::io::{load_cauchy, load_field, save_cauchy, save_field};
use wavemap_core::oracle::{error_norms, reference_field, ErrorNorms};
use wavemap_core::variational::{FunctionalValue, HistoryEntry, FIXED_SLICES};
use wavemap_core::{
    minimize, presets, BoundConstants, BoundReport, CauchyData, EnergyTrace, Grid, MinimizeOptions, SpaceTimeField,
    TargetManifold, Termination, TimeScale,
};

use crate::artifacts::{bounds_csv, cell, table_csv, trace_csv, write_json};
use crate::config::{ConfigError, ExperimentConfig, PresetKind};

/// Rescaled times of the dual pairings.
pub const DUAL_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
/// Allowed growth of a dual ratio over its reference-ε value.
pub const DUAL_GROWTH: f64 = 2.0;
/// Dual ratios below this are rounding noise and count as zero.
pub const DUAL_FLOOR: f64 = 1e-9;
/// `E_ε(0)` ratios between consecutive legs must lie within this factor band
/// around `(ε_i/ε_{i−1})²`.
pub const INITIAL_ENERGY_BAND: (f64, f64) = (0.6, 1.4);
/// Band for the intercept of `I_ε/ε² ≈ a + bε`, as multiples of `∫|∇φ|²`.
pub const SCALING_INTERCEPT_BAND: (f64, f64) = (0.5, 1.1);

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot read stored field: {0}")]
    Field(String),
}

impl RunError {
    /// Every error before the solver starts is a usage error.
    pub fn exit_code(&self) -> u8 {
        2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    BoundFailure,
    SolverFailure,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::BoundFailure => 1,
            Status::SolverFailure => 3,
        }
    }

    fn rank(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::BoundFailure => 1,
            Status::SolverFailure => 2,
        }
    }

    fn worst(self, other: Status) -> Status {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

/// Which diagnostics run, and the data needed by the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub window: f64,
    pub bounds: bool,
    pub energy: bool,
    pub dual: bool,
    pub weak: bool,
    pub oracle: Option<Oracle>,
}

/// Exact solution a run is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    /// Constant data stays put.
    Constant,
    /// Geodesic data with these `k` and `speed`.
    Geodesic { k: f64, speed: f64 },
}

impl Settings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            window: cfg.window,
            bounds: cfg.bounds,
            energy: cfg.energy,
            dual: cfg.dual,
            weak: cfg.weak,
            oracle: match cfg.preset {
                _ if !cfg.oracle => None,
                PresetKind::Constant => Some(Oracle::Constant),
                PresetKind::Geodesic => cfg.geodesic_parameters().map(|(k, speed)| Oracle::Geodesic { k, speed }),
                _ => None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualEntry {
    pub test: usize,
    pub t: f64,
    pub value: f64,
    pub scale: f64,
    pub ratio: f64,
}

/// Contents of `residuals.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eps: f64,
    /// `E_ε(0)` of the energy trace.
    pub initial_energy: f64,
    pub identity: IdentityResidual,
    pub physical_energy: Option<PhysicalEnergy>,
    pub weak: Option<WeakResidual>,
    pub dual: Vec<DualEntry>,
    /// `‖∂_t v(·,0) − ψ‖` in physical time.
    pub velocity_defect: f64,
    /// `‖v(·,0) − φ‖`.
    pub trace_defect: f64,
    /// Error against the exact wave map over the physical window.
    pub oracle: Option<ErrorNorms>,
    pub bounds_pass: bool,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub eps: f64,
    pub target: TargetManifold,
    pub grid: Grid,
    pub options: MinimizeOptions,
    pub termination: Termination,
    pub iterations: usize,
    /// Seconds; 0 in deterministic runs.
    pub wall_time: f64,
    pub comparison_value: FunctionalValue,
    pub initial_value: FunctionalValue,
    pub final_value: FunctionalValue,
    pub final_over_eps2: f64,
    pub data_dirichlet_energy: f64,
    pub data_kinetic_energy: f64,
    pub history: Vec<HistoryEntry>,
}

/// Everything one ε produced.
#[derive(Clone, Debug)]
pub struct Leg {
    pub eps: f64,
    pub status: Status,
    pub dir: PathBuf,
    pub error: Option<String>,
    pub summary: Option<SolveSummary>,
    pub field: Option<SpaceTimeField>,
    pub trace: Option<EnergyTrace>,
    pub bounds: Vec<BoundReport>,
    pub diagnostics: Option<Diagnostics>,
}

fn physical(u: &SpaceTimeField, eps: f64) -> SpaceTimeField {
    match u.grid.time_scale {
        TimeScale::Physical => u.clone(),
        TimeScale::Rescaled => u.to_physical(eps),
    }
}

/// All diagnostics of a field; `constants = None` skips the a-priori bounds.
pub fn diagnose(
    field: &SpaceTimeField,
    data: &CauchyData,
    eps: f64,
    settings: &Settings,
    constants: Option<&BoundConstants>,
) -> Result<(EnergyTrace, Vec<BoundReport>, Diagnostics), String> {
    let trace = energy_trace(field, eps);
    let identity = energy_identity_residual(&trace);
    let mut bounds = match (settings.bounds, constants) {
        (true, Some(c)) => apriori_bounds(&trace, data, eps, c),
        _ => Vec::new(),
    };
    let physical_energy = if settings.energy {
        let pe = physical_energy(field, data, eps, settings.window, BOUND_TOL).map_err(|e| e.to_string())?;
        let max = pe.energy.iter().copied().fold(0.0, f64::max);
        bounds.push(BoundReport::new("energy_inequality", max, pe.data_energy, BOUND_TOL));
        Some(pe)
    } else {
        None
    };
    let weak = if settings.weak {
        Some(weak_wave_residual(field, &WeakTestFamily::standard(settings.window), eps).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let mut dual = Vec::new();
    if settings.dual {
        for (test, h) in standard_test_fields(data.torus, data.target).iter().enumerate() {
            for t in DUAL_TIMES {
                let p = dual_pairing(field, h, t, eps).map_err(|e| e.to_string())?;
                dual.push(DualEntry {
                    test,
                    t,
                    value: p.value,
                    scale: p.scale,
                    ratio: p.ratio,
                });
            }
        }
    }
    let reference = match settings.oracle {
        Some(Oracle::Geodesic { k, speed }) => {
            let fam = presets::geodesic_family(data.target);
            let wave = presets::geodesic_wave_data(data.torus, k, speed);
            Some(reference_field(&fam, &wave, &field.grid, eps))
        }
        Some(Oracle::Constant) => Some(SpaceTimeField::from_slices(field.grid, data.target, |_| data.phi.clone())),
        None => None,
    };
    let oracle = match reference {
        Some(r) => Some(
            error_norms(&physical(field, eps), &physical(&r, eps), (0.0, settings.window)).map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    let diagnostics = Diagnostics {
        eps,
        initial_energy: trace.e[0],
        identity,
        physical_energy,
        weak,
        dual,
        velocity_defect: initial_velocity_recovery(field, data, eps).map_err(|e| e.to_string())?,
        trace_defect: initial_trace_defect(field, data),
        oracle,
        bounds_pass: bounds.iter().all(|b| b.pass),
    };
    Ok((trace, bounds, diagnostics))
}

fn eps_dir(root: &Path, eps: f64) -> PathBuf {
    root.join(format!("eps_{eps}"))
}

struct Solved {
    report: wavemap_core::MinimizeReport,
    summary: SolveSummary,
}

fn solve(cfg: &ExperimentConfig, data: &CauchyData, eps: f64, deterministic: bool) -> Result<Solved, String> {
    let grid = cfg.grid(eps).map_err(|e| e.to_string())?;
    let opts = cfg.options();
    let report = minimize(data, eps, &grid, &opts).map_err(|e| e.to_string())?;
    let summary = SolveSummary {
        eps,
        target: data.target,
        grid,
        options: opts,
        termination: report.termination,
        iterations: report.iterations,
        wall_time: if deterministic { 0.0 } else { report.wall_time },
        comparison_value: report.comparison_value,
        initial_value: report.initial_value,
        final_value: report.final_value,
        final_over_eps2: report.final_value.total / (eps * eps),
        data_dirichlet_energy: data.dirichlet_energy(),
        data_kinetic_energy: data.kinetic_energy(),
        history: report.history.clone(),
    };
    Ok(Solved { report, summary })
}

/// Bound constants fitted at the reference ε, plus that solve for reuse.
fn reference_constants(
    cfg: &ExperimentConfig,
    data: &CauchyData,
    deterministic: bool,
) -> (Option<BoundConstants>, Option<Solved>, Option<String>) {
    let eps = cfg.reference_eps;
    match solve(cfg, data, eps, deterministic) {
        Ok(s) if s.report.termination == Termination::GradientTol => {
            let c = calibrate_bounds(&energy_trace(&s.report.field, eps), data, eps);
            (Some(c), Some(s), None)
        }
        Ok(s) => (None, None, Some(format!("reference solve at eps {eps} ended with {:?}", s.report.termination))),
        Err(e) => (None, None, Some(format!("reference solve at eps {eps} failed: {e}"))),
    }
}

fn write_leg(
    leg_dir: &Path,
    solved: &Solved,
    data: &CauchyData,
    eps: f64,
    settings: &Settings,
    constants: Option<&BoundConstants>,
    diag: Option<(&EnergyTrace, &[BoundReport], &Diagnostics)>,
) -> std::io::Result<()> {
    fs::create_dir_all(leg_dir)?;
    write_json(&leg_dir.join("report.json"), &solved.summary)?;
    if let Some((trace, bounds, d)) = diag {
        fs::write(leg_dir.join("trace.csv"), trace_csv(trace))?;
        fs::write(leg_dir.join("bounds.csv"), bounds_csv(bounds))?;
        write_json(&leg_dir.join("residuals.json"), d)?;
    }
    save_cauchy(&leg_dir.join("cauchy"), data).map_err(std::io::Error::other)?;
    let extra = serde_json::json!({ "settings": settings, "bound_constants": constants });
    save_field(
        &leg_dir.join("field"),
        &solved.report.field,
        eps,
        FIXED_SLICES,
        Some("cauchy.json".into()),
        Some(extra),
    )
    .map_err(std::io::Error::other)?;
    Ok(())
}

fn run_leg(
    cfg: &ExperimentConfig,
    data: &CauchyData,
    eps: f64,
    settings: &Settings,
    constants: Option<&BoundConstants>,
    solved: Result<Solved, String>,
) -> Result<Leg, RunError> {
    let dir = eps_dir(&cfg.output_dir, eps);
    let mut leg = Leg {
        eps,
        status: Status::SolverFailure,
        dir: dir.clone(),
        error: None,
        summary: None,
        field: None,
        trace: None,
        bounds: Vec::new(),
        diagnostics: None,
    };
    let solved = match solved {
        Ok(s) => s,
        Err(e) => {
            leg.error = Some(e);
            return Ok(leg);
        }
    };
    if solved.report.termination != Termination::GradientTol {
        write_leg(&dir, &solved, data, eps, settings, constants, None)?;
        leg.error = Some(format!("minimizer stopped with {:?}", solved.report.termination));
        leg.summary = Some(solved.summary);
        leg.field = Some(solved.report.field);
        return Ok(leg);
    }
    let (trace, bounds, diag) = match diagnose(&solved.report.field, data, eps, settings, constants) {
        Ok(v) => v,
        Err(e) => {
            write_leg(&dir, &solved, data, eps, settings, constants, None)?;
            leg.error = Some(e);
            return Ok(leg);
        }
    };
    write_leg(&dir, &solved, data, eps, settings, constants, Some((&trace, &bounds, &diag)))?;
    leg.status = if diag.bounds_pass { Status::Pass } else { Status::BoundFailure };
    if settings.bounds && constants.is_none() {
        leg.status = Status::SolverFailure;
        leg.error = Some("bound constants unavailable: the reference solve failed".into());
    }
    leg.summary = Some(solved.summary);
    leg.field = Some(solved.report.field);
    leg.trace = Some(trace);
    leg.bounds = bounds;
    leg.diagnostics = Some(diag);
    Ok(leg)
}

/// Runs every ε of the config in order. Bound constants come from a solve at
/// `reference_eps`, reused as a leg when that ε is in the list.
fn run_legs(cfg: &ExperimentConfig, deterministic: bool) -> Result<(CauchyData, Option<BoundConstants>, Vec<Leg>), RunError> {
    let data = cfg.cauchy_data()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let settings = Settings::from_config(cfg);
    let (constants, mut reference, ref_error) = if cfg.bounds {
        reference_constants(cfg, &data, deterministic)
    } else {
        (None, None, None)
    };
    if let Some(c) = &constants {
        write_json(&cfg.output_dir.join("bound_constants.json"), c)?;
    }
    let mut legs = Vec::new();
    for &eps in &cfg.eps {
        let solved = match reference.take() {
            Some(s) if s.summary.eps == eps => Ok(s),
            other => {
                reference = other;
                solve(cfg, &data, eps, deterministic)
            }
        };
        let mut leg = run_leg(cfg, &data, eps, &settings, constants.as_ref(), solved)?;
        if let (Some(e), true) = (&ref_error, leg.error.is_some() && leg.status == Status::SolverFailure) {
            leg.error = Some(format!("{}; {e}", leg.error.take().unwrap_or_default()));
        }
        legs.push(leg);
    }
    Ok((data, constants, legs))
}

/// Result of `solve`.
#[derive(Clone, Debug)]
pub struct SingleOutcome {
    pub status: Status,
    pub leg: Leg,
    pub constants: Option<BoundConstants>,
}

/// One ε: artifacts under `output_dir/eps_<ε>/`.
pub fn run_single(cfg: &ExperimentConfig, deterministic: bool) -> Result<SingleOutcome, RunError> {
    if cfg.eps.len() != 1 {
        return Err(ConfigError::Invalid(format!("solve takes exactly one eps, got {}", cfg.eps.len())).into());
    }
    let (_, constants, mut legs) = run_legs(cfg, deterministic)?;
    let leg = legs.remove(0);
    Ok(SingleOutcome {
        status: leg.status,
        leg,
        constants,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub status: Status,
    pub termination: Option<Termination>,
    pub iterations: Option<usize>,
    pub functional: Option<f64>,
    pub functional_over_eps2: Option<f64>,
    pub comparison_over_eps2: Option<f64>,
    pub initial_energy: Option<f64>,
    pub oracle_l2: Option<f64>,
    pub oracle_max_slice: Option<f64>,
    pub identity_l1: Option<f64>,
    pub identity_corrected_l1: Option<f64>,
    pub weak_residual: Option<f64>,
    pub velocity_defect: Option<f64>,
    pub bounds_pass: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub status: Status,
    pub rows: Vec<SweepRow>,
    pub verdicts: Vec<Verdict>,
    pub bound_constants: Option<BoundConstants>,
}

/// Result of `sweep`.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub legs: Vec<Leg>,
    pub data: CauchyData,
}

fn row(leg: &Leg) -> SweepRow {
    let s = leg.summary.as_ref();
    let d = leg.diagnostics.as_ref();
    SweepRow {
        eps: leg.eps,
        status: leg.status,
        termination: s.map(|s| s.termination),
        iterations: s.map(|s| s.iterations),
        functional: s.map(|s| s.final_value.total),
        functional_over_eps2: s.map(|s| s.final_over_eps2),
        comparison_over_eps2: s.map(|s| s.comparison_value.total / (leg.eps * leg.eps)),
        initial_energy: d.map(|d| d.initial_energy),
        oracle_l2: d.and_then(|d| d.oracle.map(|o| o.l2)),
        oracle_max_slice: d.and_then(|d| d.oracle.map(|o| o.max_slice)),
        identity_l1: d.map(|d| d.identity.weighted_l1),
        identity_corrected_l1: d.map(|d| d.identity.corrected_weighted_l1),
        weak_residual: d.and_then(|d| d.weak.as_ref().map(|w| w.max_residual)),
        velocity_defect: d.map(|d| d.velocity_defect),
        bounds_pass: d.map(|d| d.bounds_pass),
        error: leg.error.clone(),
    }
}

fn monotone(name: &str, values: &[(f64, f64)], strict: bool) -> Verdict {
    let pass = values.windows(2).all(|w| if strict { w[1].1 < w[0].1 } else { w[1].1 <= w[0].1 });
    // all-zero columns (constant data) are trivially monotone
    let pass = pass || values.iter().all(|v| v.1 == 0.0);
    let detail = values.iter().map(|(e, v)| format!("{e}: {v:.4e}")).collect::<Vec<_>>().join(", ");
    Verdict {
        name: name.into(),
        pass,
        detail,
    }
}

/// Trend checks over the legs that finished.
pub fn verdicts(data: &CauchyData, legs: &[Leg]) -> Vec<Verdict> {
    let done: Vec<&Leg> = legs.iter().filter(|l| l.diagnostics.is_some()).collect();
    let mut out = Vec::new();
    if done.len() < legs.len() {
        out.push(Verdict {
            name: "all_legs_finished".into(),
            pass: false,
            detail: format!("{} of {} legs finished", done.len(), legs.len()),
        });
    }
    let diag = |l: &&Leg| l.diagnostics.clone().expect("finished leg");

    let oracle: Vec<(f64, f64)> = done.iter().filter_map(|l| diag(l).oracle.map(|o| (l.eps, o.l2))).collect();
    if oracle.len() == done.len() && oracle.len() >= 2 {
        out.push(monotone("oracle_error_decreasing", &oracle, true));
    }
    let weak: Vec<(f64, f64)> = done
        .iter()
        .filter_map(|l| diag(l).weak.map(|w| (l.eps, w.max_residual)))
        .collect();
    if weak.len() == done.len() && weak.len() >= 2 {
        out.push(monotone("weak_residual_nonincreasing", &weak, false));
    }

    if done.len() >= 2 {
        let eps: Vec<f64> = done.iter().map(|l| l.eps).collect();
        let scaled: Vec<f64> = done
            .iter()
            .map(|l| l.summary.as_ref().expect("finished leg").final_over_eps2)
            .collect();
        let (a, b) = fit_affine(&eps, &scaled);
        let s = data.dirichlet_energy();
        let (lo, hi) = (SCALING_INTERCEPT_BAND.0 * s, SCALING_INTERCEPT_BAND.1 * s);
        out.push(Verdict {
            name: "functional_scaling".into(),
            pass: a >= lo - 1e-12 && a <= hi + 1e-12,
            detail: format!("I/eps^2 = {a:.6} + {b:.6} eps; intercept band [{lo:.6}, {hi:.6}]"),
        });

        let e0: Vec<f64> = done.iter().map(|l| diag(l).initial_energy).collect();
        let mut ok = true;
        let mut parts = Vec::new();
        for i in 1..done.len() {
            let expect = (eps[i] / eps[i - 1]).powi(2);
            if e0[i - 1] == 0.0 && e0[i] == 0.0 {
                continue;
            }
            let r = e0[i] / e0[i - 1];
            ok &= r >= INITIAL_ENERGY_BAND.0 * expect && r <= INITIAL_ENERGY_BAND.1 * expect;
            parts.push(format!("{}->{}: {r:.4} (eps^2 ratio {expect:.4})", eps[i - 1], eps[i]));
        }
        out.push(Verdict {
            name: "initial_energy_scaling".into(),
            pass: ok,
            detail: parts.join(", "),
        });

        let first = diag(&done[0]);
        if !first.dual.is_empty() {
            let mut worst: f64 = 0.0;
            for l in &done[1..] {
                for (p, q) in diag(l).dual.iter().zip(&first.dual) {
                    let g = if p.ratio <= DUAL_FLOOR {
                        0.0
                    } else if q.ratio > DUAL_FLOOR {
                        p.ratio / q.ratio
                    } else if p.ratio > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    };
                    worst = worst.max(g);
                }
            }
            out.push(Verdict {
                name: "dual_ratio_stable".into(),
                pass: worst <= DUAL_GROWTH,
                detail: format!("largest growth over eps {}: {worst:.4} (limit {DUAL_GROWTH})", done[0].eps),
            });
        }
    }
    out
}

const SWEEP_COLUMNS: [&str; 15] = [
    "eps",
    "status",
    "termination",
    "iterations",
    "functional",
    "functional_over_eps2",
    "comparison_over_eps2",
    "initial_energy",
    "oracle_l2",
    "oracle_max_slice",
    "identity_l1",
    "identity_corrected_l1",
    "weak_residual",
    "velocity_defect",
    "bounds_pass",
];

const SWEEP_DOC: &str = "eps; status (pass | bound_failure | solver_failure); termination and iterations of \
the minimizer; functional I_eps and I_eps/eps^2; comparison map value/eps^2; initial_energy E_eps(0); \
oracle_l2 and oracle_max_slice vs the exact wave map over the physical window; identity_l1 and \
identity_corrected_l1: weighted L1 of E'+2D raw and without the truncation mode; weak_residual: max over \
the test family; velocity_defect: |v_t(0) - psi|; bounds_pass";

fn sweep_csv(rows: &[SweepRow]) -> String {
    let json = |v: serde_json::Value| match v {
        serde_json::Value::String(s) => s,
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    };
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.eps.to_string(),
                json(serde_json::to_value(r.status).unwrap_or_default()),
                json(serde_json::to_value(r.termination).unwrap_or_default()),
                r.iterations.map(|v| v.to_string()).unwrap_or_default(),
                cell(r.functional),
                cell(r.functional_over_eps2),
                cell(r.comparison_over_eps2),
                cell(r.initial_energy),
                cell(r.oracle_l2),
                cell(r.oracle_max_slice),
                cell(r.identity_l1),
                cell(r.identity_corrected_l1),
                cell(r.weak_residual),
                cell(r.velocity_defect),
                r.bounds_pass.map(|v| v.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    table_csv(SWEEP_DOC, &SWEEP_COLUMNS, &cells)
}

/// All ε in order, continuing past failed legs; writes `sweep.csv` and `sweep.json`.
pub fn run_sweep(cfg: &ExperimentConfig, deterministic: bool) -> Result<SweepOutcome, RunError> {
    cfg.validate_sweep()?;
    let (data, constants, legs) = run_legs(cfg, deterministic)?;
    let rows: Vec<SweepRow> = legs.iter().map(row).collect();
    let verdicts = verdicts(&data, &legs);
    let mut status = legs.iter().fold(Status::Pass, |s, l| s.worst(l.status));
    if status == Status::Pass && verdicts.iter().any(|v| !v.pass) {
        status = Status::BoundFailure;
    }
    let summary = SweepSummary {
        status,
        rows,
        verdicts,
        bound_constants: constants,
    };
    fs::write(cfg.output_dir.join("sweep.csv"), sweep_csv(&summary.rows))?;
    write_json(&cfg.output_dir.join("sweep.json"), &summary)?;
    Ok(SweepOutcome { summary, legs, data })
}

/// Result of `verify`.
#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub status: Status,
    pub bounds: Vec<BoundReport>,
    pub diagnostics: Diagnostics,
    pub out_dir: PathBuf,
}

/// Re-runs the diagnostics on a stored field, using the settings and frozen
/// constants recorded next to it (constants are refitted on the field itself
/// when none were stored).
pub fn verify(field_json: &Path, out_dir: Option<&Path>) -> Result<VerifyOutcome, RunError> {
    let (field, sidecar) = load_field(field_json).map_err(|e| RunError::Field(e.to_string()))?;
    let dir = field_json.parent().unwrap_or(Path::new("."));
    let cauchy = sidecar
        .cauchy_file
        .as_ref()
        .ok_or_else(|| RunError::Field("the field does not name its Cauchy data".into()))?;
    let data = load_cauchy(&dir.join(cauchy)).map_err(|e| RunError::Field(e.to_string()))?;
    let eps = sidecar.eps.ok_or_else(|| RunError::Field("the field does not record eps".into()))?;
    let extra = sidecar.extra.unwrap_or_default();
    let settings: Settings = serde_json::from_value(extra["settings"].clone()).unwrap_or(Settings {
        window: 0.8,
        bounds: true,
        energy: true,
        dual: true,
        weak: true,
        oracle: None,
    });
    let constants: Option<BoundConstants> = serde_json::from_value(extra["bound_constants"].clone()).ok();
    let constants = constants.or_else(|| Some(calibrate_bounds(&energy_trace(&field, eps), &data, eps)));
    let (trace, bounds, diagnostics) =
        diagnose(&field, &data, eps, &settings, constants.as_ref()).map_err(RunError::Field)?;
    let out_dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| dir.join("verify"));
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("trace.csv"), trace_csv(&trace))?;
    fs::write(out_dir.join("bounds.csv"), bounds_csv(&bounds))?;
    write_json(&out_dir.join("residuals.json"), &diagnostics)?;
    let status = if diagnostics.bounds_pass { Status::Pass } else { Status::BoundFailure };
    Ok(VerifyOutcome {
        status,
        bounds,
        diagnostics,
        out_dir,
    })
}
