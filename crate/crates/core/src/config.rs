//! Scenario configuration.
//!
//! The file is TOML restricted to one level of sections: `[model]`, `[grid]`,
//! `[solver]`, `[initial]`, `[analysis]`, `[output]`, plus a top-level `kind`.
//! Unknown keys are rejected. Every default is resolved at parse time and the
//! resolved configuration serialises back to the same keys, so a report's echo
//! can be fed back in unchanged.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::TailPolicy;
use crate::solver::{required_half_length, InitialData, Scheme, SolverConfig};
use crate::theory::ModelParams;
use crate::wave::{min_half_length, FixedPointConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Simulate,
    Speed,
    Wave,
    Sweep,
    KernelSelftest,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Simulate => "simulate",
            ScenarioKind::Speed => "speed",
            ScenarioKind::Wave => "wave",
            ScenarioKind::Sweep => "sweep",
            ScenarioKind::KernelSelftest => "kernel-selftest",
        }
    }

    fn needs_global_existence(self) -> bool {
        matches!(self, ScenarioKind::Simulate | ScenarioKind::Speed | ScenarioKind::Wave | ScenarioKind::Sweep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Chi,
    A,
    B,
    Lambda,
    Mu,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Chi => "chi",
            SweepParam::A => "a",
            SweepParam::B => "b",
            SweepParam::Lambda => "lambda",
            SweepParam::Mu => "mu",
        }
    }

    pub fn apply(self, p: &ModelParams, value: f64) -> ModelParams {
        let mut q = *p;
        match self {
            SweepParam::Chi => q.chi = value,
            SweepParam::A => q.a = value,
            SweepParam::B => q.b = value,
            SweepParam::Lambda => q.lambda = value,
            SweepParam::Mu => q.mu = value,
        }
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_length: f64,
    pub h: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::with_spacing(self.half_length, self.h)
    }
}

/// Time stepping plus the wave relaxation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub scheme: Scheme,
    pub tail: TailPolicy,
    pub observer_stride: usize,
    pub neg_tolerance: f64,
    pub steady_tol: f64,
    pub fp_tol: f64,
    pub max_outer_iters: usize,
    pub relax_dt: f64,
    pub relax_horizon: f64,
    pub damping: f64,
}

impl SolverSpec {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            cfl_safety: self.cfl_safety,
            scheme: self.scheme,
            tail: self.tail,
            observer_stride: self.observer_stride,
            neg_tolerance: self.neg_tolerance,
        }
    }

    pub fn fixed_point_config(&self) -> FixedPointConfig {
        FixedPointConfig {
            steady_tol: self.steady_tol,
            fp_tol: self.fp_tol,
            max_outer_iters: self.max_outer_iters,
            relax_dt: self.relax_dt,
            relax_horizon: self.relax_horizon,
            damping: self.damping,
            ..FixedPointConfig::default()
        }
    }
}

/// Measurement settings and the assertions a run must satisfy. Every `Option`
/// left unset disables the corresponding check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    pub speed_min: f64,
    pub speed_max: f64,
    pub speed_step: f64,
    pub late_fraction: f64,
    pub behind_speed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub behind_time: Option<f64>,
    pub shape_eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape_time: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_speed: Option<f64>,
    pub speed_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_interval: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_behind_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_shape_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound_slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_m: Option<f64>,
    pub max_envelope_ratio: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub wave_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub wave_speeds: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tail_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_left_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_consistency_time: Option<f64>,
    pub self_consistency_tolerance: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<SweepParam>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub sweep_values: Vec<f64>,
    pub sweep_kind: ScenarioKind,

    pub seed: u64,
    pub selftest_fields: usize,
    pub selftest_cells: usize,
}

impl AnalysisSpec {
    pub fn speed_grid(&self) -> Vec<f64> {
        let n = ((self.speed_max - self.speed_min) / self.speed_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.speed_min + k as f64 * self.speed_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Every `stride`-th recorded snapshot goes into the trajectory CSV.
    pub stride: usize,
    pub trajectory: bool,
    pub front: bool,
    pub wave: bool,
    pub report: String,
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub model: ModelParams,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub initial: InitialData,
    pub analysis: AnalysisSpec,
    pub output: OutputSpec,
}

impl ScenarioConfig {
    /// TOML text that parses back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config is always representable")
    }

    /// Copy with the kind replaced and the derived defaults left untouched.
    pub fn with_kind(&self, kind: ScenarioKind) -> Self {
        ScenarioConfig { kind, ..self.clone() }
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid.grid()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<ScenarioKind>,
    model: Option<RawModel>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    solver: RawSolver,
    initial: Option<RawInitial>,
    #[serde(default)]
    analysis: RawAnalysis,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    chi: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    lambda: Option<f64>,
    mu: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    half_length: Option<f64>,
    h: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    dt: Option<f64>,
    t_end: Option<f64>,
    cfl_safety: Option<f64>,
    scheme: Option<Scheme>,
    tail: Option<TailPolicy>,
    observer_stride: Option<usize>,
    neg_tolerance: Option<f64>,
    steady_tol: Option<f64>,
    fp_tol: Option<f64>,
    max_outer_iters: Option<usize>,
    relax_dt: Option<f64>,
    relax_horizon: Option<f64>,
    damping: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
enum InitialKind {
    Compact,
    FrontLike,
    Exponential,
    Constant,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: InitialKind,
    center: Option<f64>,
    width: Option<f64>,
    height: Option<f64>,
    level: Option<f64>,
    interface: Option<f64>,
    kappa: Option<f64>,
    floor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    theta: Option<f64>,
    fit_window: Option<[f64; 2]>,
    speed_min: Option<f64>,
    speed_max: Option<f64>,
    speed_step: Option<f64>,
    late_fraction: Option<f64>,
    behind_speed: Option<f64>,
    behind_time: Option<f64>,
    shape_eps: Option<f64>,
    shape_time: Option<f64>,
    expect_speed: Option<f64>,
    speed_tolerance: Option<f64>,
    expect_interval: Option<[f64; 2]>,
    max_behind_deviation: Option<f64>,
    max_shape_deviation: Option<f64>,
    lower_bound_slack: Option<f64>,
    symmetry_tolerance: Option<f64>,
    equilibrium_tolerance: Option<f64>,
    envelope_kappa: Option<f64>,
    envelope_m: Option<f64>,
    max_envelope_ratio: Option<f64>,
    wave_kappa: Option<f64>,
    wave_speed: Option<f64>,
    wave_speeds: Option<Vec<f64>>,
    max_residual: Option<f64>,
    max_tail_deviation: Option<f64>,
    max_left_deviation: Option<f64>,
    self_consistency_time: Option<f64>,
    self_consistency_tolerance: Option<f64>,
    sweep_param: Option<SweepParam>,
    sweep_values: Option<Vec<f64>>,
    sweep_kind: Option<ScenarioKind>,
    seed: Option<u64>,
    selftest_fields: Option<usize>,
    selftest_cells: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    stride: Option<usize>,
    trajectory: Option<bool>,
    front: Option<bool>,
    wave: Option<bool>,
    report: Option<String>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// Parse and fully resolve a scenario. `kind_override` replaces the file's `kind`
/// (the CLI subcommand does this).
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_config_as(text, None)
}

pub fn parse_config_as(text: &str, kind_override: Option<ScenarioKind>) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    resolve(raw, kind_override)
}

fn resolve(raw: RawConfig, kind_override: Option<ScenarioKind>) -> Result<ScenarioConfig> {
    let kind =
        kind_override.or(raw.kind).ok_or_else(|| config_err("missing key `kind` (simulate, speed, wave, sweep or kernel-selftest)"))?;

    let m = raw.model.ok_or_else(|| config_err("missing section [model]"))?;
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| config_err(format!("missing key model.{name}")));
    let model = ModelParams {
        chi: need("chi", m.chi)?,
        a: need("a", m.a)?,
        b: need("b", m.b)?,
        lambda: need("lambda", m.lambda)?,
        mu: need("mu", m.mu)?,
    };
    model.validate().map_err(|e| config_err(e.to_string()))?;
    if kind.needs_global_existence() {
        model.require_global_existence().map_err(|e| config_err(e.to_string()))?;
    }

    let r = raw.analysis;
    let cap = model.carrying_capacity();
    let sweep_kind = r.sweep_kind.unwrap_or(ScenarioKind::Speed);

    // Initial data. Compact bump by default.
    let initial = match raw.initial {
        None => InitialData::Compact { center: 0.0, width: 2.0, height: 1.0 },
        Some(i) => match i.kind {
            InitialKind::Compact => {
                InitialData::Compact { center: i.center.unwrap_or(0.0), width: i.width.unwrap_or(2.0), height: i.height.unwrap_or(1.0) }
            }
            InitialKind::FrontLike => InitialData::FrontLike {
                level: i.level.unwrap_or(cap),
                interface: i.interface.unwrap_or(0.0),
                width: i.width.unwrap_or(2.0),
            },
            InitialKind::Exponential => InitialData::Exponential {
                kappa: i.kappa.ok_or_else(|| config_err("exponential initial data needs initial.kappa"))?,
                floor: i.floor.unwrap_or(cap),
            },
            InitialKind::Constant => InitialData::Constant { level: i.level.unwrap_or(cap) },
        },
    };
    let run_kind = if kind == ScenarioKind::Sweep { sweep_kind } else { kind };
    if let InitialData::Exponential { kappa, .. } = initial {
        if matches!(run_kind, ScenarioKind::Simulate | ScenarioKind::Speed) && !(kappa > 0.0 && kappa < model.sqrt_a()) {
            return Err(config_err(format!(
                "exponential initial data needs 0 < kappa < sqrt(a) = {} (got kappa = {kappa})",
                model.sqrt_a()
            )));
        }
    }

    let theta = r.theta.unwrap_or(0.5 * cap);
    if !(theta > 0.0 && theta < cap) {
        return Err(config_err(format!("analysis.theta must satisfy 0 < theta < a/b = {cap}, got {theta}")));
    }

    // Wave decay rate from either kappa or speed.
    let wave_kappa = match (r.wave_kappa, r.wave_speed) {
        (Some(_), Some(_)) => return Err(config_err("give at most one of analysis.wave_kappa and analysis.wave_speed")),
        (Some(k), None) => Some(k),
        (None, Some(c)) => Some(
            model
                .kappa_for_speed(c)
                .ok_or_else(|| config_err(format!("wave_speed must satisfy c >= 2 sqrt(a) = {}, got {c}", 2.0 * model.sqrt_a())))?,
        ),
        (None, None) => None,
    };
    if run_kind == ScenarioKind::Wave {
        let k_max = model.sqrt_a().min(model.sqrt_lambda());
        match wave_kappa {
            Some(k) if k > 0.0 && k < k_max => {}
            Some(k) => return Err(config_err(format!("wave decay rate needs 0 < kappa < min(sqrt a, sqrt lambda) = {k_max}, got {k}"))),
            None if r.wave_speeds.as_ref().is_some_and(|s| !s.is_empty()) => {}
            None => return Err(config_err("wave scenario needs analysis.wave_kappa, wave_speed or wave_speeds")),
        }
    }

    // Solver.
    let s = raw.solver;
    let default_tail = match initial {
        InitialData::Compact { .. } => TailPolicy::Zero,
        InitialData::FrontLike { .. } | InitialData::Exponential { .. } => TailPolicy::ConstantLeft,
        InitialData::Constant { .. } => TailPolicy::ConstantBoth,
    };
    let solver = SolverSpec {
        dt: positive("solver.dt", s.dt.unwrap_or(0.02))?,
        t_end: positive("solver.t_end", s.t_end.unwrap_or(120.0))?,
        cfl_safety: s.cfl_safety.unwrap_or(0.9),
        scheme: s.scheme.unwrap_or(Scheme::Imex),
        tail: s.tail.unwrap_or(default_tail),
        observer_stride: s.observer_stride.unwrap_or(50),
        neg_tolerance: s.neg_tolerance.unwrap_or(1e-10),
        steady_tol: s.steady_tol.unwrap_or(1e-8),
        fp_tol: s.fp_tol.unwrap_or(1e-6),
        max_outer_iters: s.max_outer_iters.unwrap_or(50),
        relax_dt: s.relax_dt.unwrap_or((0.5f64).min(0.5 / model.a)),
        relax_horizon: s.relax_horizon.unwrap_or(5000.0),
        damping: s.damping.unwrap_or(1.0),
    };
    solver.solver_config().validate().map_err(|e| config_err(e.to_string()))?;
    solver.fixed_point_config().validate().map_err(|e| config_err(e.to_string()))?;

    // Grid, with the domain-size policy for time-dependent runs.
    let default_h = if run_kind == ScenarioKind::Wave { 0.05 } else { 0.1 };
    let h = positive("grid.h", raw.grid.h.unwrap_or(default_h))?;
    let models: Vec<ModelParams> = match (kind, r.sweep_param) {
        (ScenarioKind::Sweep, Some(param)) => r.sweep_values.iter().flatten().map(|&v| param.apply(&model, v)).collect(),
        _ => vec![model],
    };
    let required = match run_kind {
        ScenarioKind::Simulate | ScenarioKind::Speed => {
            models.iter().map(|q| time_dependent_half_length(q, &initial, theta, solver.t_end, 10.0 / q.sqrt_lambda())).reduce(f64::max)
        }
        ScenarioKind::Wave => {
            let smallest = models
                .iter()
                .flat_map(|q| {
                    let k_max = q.sqrt_a().min(q.sqrt_lambda());
                    wave_kappa
                        .into_iter()
                        .chain(r.wave_speeds.iter().flatten().filter_map(|&c| q.kappa_for_speed(c)))
                        .map(move |k| k.min(k_max))
                })
                .fold(f64::INFINITY, f64::min);
            smallest.is_finite().then(|| min_half_length(smallest))
        }
        ScenarioKind::KernelSelftest | ScenarioKind::Sweep => None,
    };
    let half_length = match (raw.grid.half_length, required) {
        (Some(l), Some(req)) if l < req * (1.0 - 1e-12) => {
            return Err(config_err(format!(
                "grid.half_length = {l} violates the domain-size policy: need L >= {req:.6} so the front stays clear of the boundary"
            )))
        }
        (Some(l), _) => positive("grid.half_length", l)?,
        (None, Some(req)) => (req / 10.0).ceil() * 10.0,
        (None, None) => 20.0,
    };
    let grid = GridSpec { half_length, h };
    grid.grid().map_err(|e| config_err(e.to_string()))?;

    let late_fraction = r.late_fraction.unwrap_or(0.1);
    if !(late_fraction > 0.0 && late_fraction <= 1.0) {
        return Err(config_err(format!("analysis.late_fraction must be in (0, 1], got {late_fraction}")));
    }
    if let Some([lo, hi]) = r.fit_window {
        if !(lo < hi) {
            return Err(config_err(format!("analysis.fit_window needs lo < hi, got [{lo}, {hi}]")));
        }
    }
    let behind_speed = r.behind_speed.unwrap_or(model.sqrt_a());
    if !(behind_speed >= 0.0 && behind_speed < 2.0 * model.sqrt_a()) {
        return Err(config_err(format!(
            "analysis.behind_speed must satisfy 0 <= c < 2 sqrt(a) = {}, got {behind_speed}",
            2.0 * model.sqrt_a()
        )));
    }
    if let Some(k) = r.envelope_kappa {
        if !(k > 0.0 && model.kappa_admissible(k)) {
            return Err(config_err(format!(
                "analysis.envelope_kappa = {k} violates (kappa - sqrt lambda)_+ / (kappa + sqrt lambda) <= 2 (b - chi mu) / (chi mu)"
            )));
        }
    }
    let sweep_values = r.sweep_values.unwrap_or_default();
    if kind == ScenarioKind::Sweep {
        let param = r.sweep_param.ok_or_else(|| config_err("sweep needs analysis.sweep_param"))?;
        if sweep_values.is_empty() {
            return Err(config_err("sweep needs a nonempty analysis.sweep_values"));
        }
        if matches!(sweep_kind, ScenarioKind::Sweep | ScenarioKind::KernelSelftest) {
            return Err(config_err("analysis.sweep_kind must be simulate, speed or wave"));
        }
        for &v in &sweep_values {
            let q = param.apply(&model, v);
            q.validate().map_err(|e| config_err(format!("sweep point {} = {v}: {e}", param.name())))?;
            q.require_global_existence().map_err(|e| config_err(format!("sweep point {} = {v}: {e}", param.name())))?;
            if theta >= q.carrying_capacity() {
                return Err(config_err(format!(
                    "sweep point {} = {v}: theta = {theta} must be < a/b = {}",
                    param.name(),
                    q.carrying_capacity()
                )));
            }
        }
    }

    let analysis = AnalysisSpec {
        theta,
        fit_window: r.fit_window,
        speed_min: r.speed_min.unwrap_or(0.0),
        speed_max: r.speed_max.unwrap_or(4.0 * model.sqrt_a()),
        speed_step: positive("analysis.speed_step", r.speed_step.unwrap_or(0.0025))?,
        late_fraction,
        behind_speed,
        behind_time: r.behind_time,
        shape_eps: positive("analysis.shape_eps", r.shape_eps.unwrap_or(0.1))?,
        shape_time: r.shape_time,
        expect_speed: r.expect_speed,
        speed_tolerance: r.speed_tolerance.unwrap_or(0.03 * r.expect_speed.unwrap_or(2.0 * model.sqrt_a())),
        expect_interval: r.expect_interval,
        max_behind_deviation: r.max_behind_deviation,
        max_shape_deviation: r.max_shape_deviation,
        lower_bound_slack: r.lower_bound_slack,
        symmetry_tolerance: r.symmetry_tolerance,
        equilibrium_tolerance: r.equilibrium_tolerance,
        envelope_kappa: r.envelope_kappa,
        envelope_m: r.envelope_m,
        max_envelope_ratio: r.max_envelope_ratio.unwrap_or(1.0 + 1e-6),
        wave_kappa,
        wave_speeds: r.wave_speeds.unwrap_or_default(),
        max_residual: r.max_residual,
        max_tail_deviation: r.max_tail_deviation,
        max_left_deviation: r.max_left_deviation,
        self_consistency_time: r.self_consistency_time,
        self_consistency_tolerance: r.self_consistency_tolerance.unwrap_or(0.02),
        sweep_param: r.sweep_param,
        sweep_values,
        sweep_kind,
        seed: r.seed.unwrap_or(0),
        selftest_fields: r.selftest_fields.unwrap_or(100),
        selftest_cells: r.selftest_cells.unwrap_or(512),
    };
    if !(analysis.speed_min < analysis.speed_max) {
        return Err(config_err("analysis.speed_min must be < analysis.speed_max"));
    }

    let o = raw.output;
    let output = OutputSpec {
        dir: o.dir.unwrap_or_else(|| PathBuf::from("out")),
        stride: o.stride.unwrap_or(1).max(1),
        trajectory: o.trajectory.unwrap_or(kind == ScenarioKind::Simulate),
        front: o.front.unwrap_or(true),
        wave: o.wave.unwrap_or(true),
        report: o.report.unwrap_or_else(|| "report.txt".into()),
    };

    Ok(ScenarioConfig { kind, model, grid, solver, initial, analysis, output })
}

/// Half-length keeping the fastest predicted front clear of the boundary buffer.
pub fn time_dependent_half_length(p: &ModelParams, initial: &InitialData, theta: f64, t_end: f64, buffer: f64) -> f64 {
    let (a_star, c_star) = match p.speed_constants() {
        Ok(c) => (c.a_star, c.c_star),
        Err(_) => (p.sqrt_a(), 2.0 * p.sqrt_a()),
    };
    match *initial {
        InitialData::Compact { center, .. } => required_half_length(initial.right_extent(theta), c_star, t_end, a_star, buffer)
            .max(required_half_length(initial.right_extent(theta) - 2.0 * center, c_star, t_end, a_star, buffer)),
        InitialData::Exponential { kappa, .. } => {
            let k = kappa.min(a_star);
            required_half_length(initial.right_extent(theta), p.c_kappa(k).max(c_star), t_end, k, buffer)
        }
        InitialData::FrontLike { .. } => required_half_length(initial.right_extent(theta), c_star, t_end, a_star, buffer),
        InitialData::Constant { .. } => buffer + 20.0 / a_star,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = "[model]\nchi = 0.4\na = 1\nb = 1\nlambda = 1\nmu = 1\n";

    #[test]
    fn minimal_selftest_gets_defaults() {
        let cfg = parse_config(&format!("kind = \"kernel-selftest\"\n{MODEL}")).unwrap();
        assert_eq!(cfg.kind, ScenarioKind::KernelSelftest);
        assert_eq!(cfg.analysis.theta, 0.5);
        assert_eq!(cfg.solver.dt, 0.02);
        assert_eq!(cfg.analysis.selftest_fields, 100);
        assert_eq!(cfg.output.report, "report.txt");
    }

    #[test]
    fn equality_chi_mu_b_is_rejected() {
        let text = "kind = \"speed\"\n[model]\nchi = 1\na = 1\nb = 1\nlambda = 1\nmu = 1\n";
        let msg = parse_config(text).unwrap_err().to_string();
        assert!(msg.contains("chi*mu < b"), "{msg}");
    }

    #[test]
    fn steep_exponential_data_is_rejected() {
        let text = format!("kind = \"speed\"\n{MODEL}[initial]\nkind = \"exponential\"\nkappa = 1.2\n");
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(msg.contains("kappa < sqrt(a)"), "{msg}");
    }

    #[test]
    fn unknown_keys_and_missing_keys() {
        let e = parse_config(&format!("kind = \"speed\"\n{MODEL}[grid]\nspacing = 0.1\n")).unwrap_err();
        assert!(e.to_string().contains("spacing"), "{e}");
        let e = parse_config("kind = \"speed\"\n[model]\nchi = 0.1\na = 1\n").unwrap_err();
        assert!(e.to_string().contains("model.b"), "{e}");
        assert!(parse_config(MODEL).is_err());
    }

    #[test]
    fn domain_policy_is_enforced() {
        let ok = parse_config(&format!("kind = \"speed\"\n{MODEL}[grid]\nhalf_length = 300\n")).unwrap();
        assert_eq!(ok.grid.half_length, 300.0);
        let msg = parse_config(&format!("kind = \"speed\"\n{MODEL}[grid]\nhalf_length = 100\n")).unwrap_err().to_string();
        assert!(msg.contains("domain-size"), "{msg}");
        let auto = parse_config(&format!("kind = \"speed\"\n{MODEL}")).unwrap();
        assert!(auto.grid.half_length >= 1.0 + 2.0 * 120.0 + 20.0 + 10.0);
    }

    #[test]
    fn subcommand_overrides_kind() {
        let cfg = parse_config_as(&format!("kind = \"speed\"\n{MODEL}"), Some(ScenarioKind::Simulate)).unwrap();
        assert_eq!(cfg.kind, ScenarioKind::Simulate);
        assert!(cfg.output.trajectory);
    }

    #[test]
    fn wave_speed_maps_to_kappa() {
        let cfg = parse_config(&format!("kind = \"wave\"\n{MODEL}[analysis]\nwave_speed = 2.5\n")).unwrap();
        assert!((cfg.analysis.wave_kappa.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(cfg.grid.half_length, 80.0);
        assert_eq!(cfg.grid.h, 0.05);
        assert!(parse_config(&format!("kind = \"wave\"\n{MODEL}[analysis]\nwave_kappa = 1.0\n")).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = format!(
            "kind = \"sweep\"\n{MODEL}[initial]\nkind = \"front-like\"\n[analysis]\nsweep_param = \"chi\"\nsweep_values = [0.0, 0.2]\nexpect_interval = [1.9, 2.1]\n"
        );
        let cfg = parse_config(&text).unwrap();
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn sweep_points_are_validated() {
        let text = format!("kind = \"sweep\"\n{MODEL}[analysis]\nsweep_param = \"chi\"\nsweep_values = [0.5, 1.0]\n");
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(msg.contains("chi = 1"), "{msg}");
    }
}
