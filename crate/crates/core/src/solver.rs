//! Time integration of `u_t = u_xx - chi (u v_x)_x + u (a - b u)` with `v = Psi(.; u)`.
//!
//! Nodes carry finite volumes (half volumes at the two ends) with zero flux
//! through `x = +-L`. The chemotactic flux lives on faces,
//! `F_{i+1/2} = chi (u_i + u_{i+1})/2 (v_{i+1} - v_i)/h`, and is differenced
//! conservatively. Under [`Scheme::Imex`] the reaction is advanced by the exact
//! logistic flow and the chemotactic divergence explicitly, then diffusion is
//! solved implicitly; [`Scheme::ExplicitEuler`] advances everything with one
//! forward Euler step and is kept as a cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::kernel::{psi_fast, TailPolicy};
use crate::theory::ModelParams;
use crate::tridiag::solve_tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExplicitEuler,
    Imex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub scheme: Scheme,
    pub tail: TailPolicy,
    pub observer_stride: usize,
    pub neg_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 0.02,
            t_end: 120.0,
            cfl_safety: 0.9,
            scheme: Scheme::Imex,
            tail: TailPolicy::Zero,
            observer_stride: 50,
            neg_tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl_safety must be in (0, 1], got {}", self.cfl_safety)));
        }
        if self.observer_stride == 0 {
            return Err(Error::InvalidParameter("observer_stride must be >= 1".into()));
        }
        if !(self.neg_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("neg_tolerance must be >= 0".into()));
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `t_end`.
    pub fn step_plan(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Density with its chemical field; `v` and `v_x` always belong to the current `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
    pub v_x: ScalarField,
}

impl State {
    pub fn new(t: f64, u: ScalarField, p: &ModelParams, tail: TailPolicy) -> State {
        let (v, v_x) = psi_fast(&u, p, tail);
        State { t, u, v, v_x }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

/// Receives every recorded state of a run.
pub trait Observer {
    fn observe(&mut self, state: &State, p: &ModelParams) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&State, &ModelParams) -> Result<()>,
{
    fn observe(&mut self, state: &State, p: &ModelParams) -> Result<()> {
        self(state, p)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub config: SolverConfig,
    pub params: ModelParams,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.states[0].grid()
    }

    pub fn first(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Recorded state closest to `t`.
    pub fn at(&self, t: f64) -> &State {
        self.states.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).expect("trajectory is never empty")
    }
}

/// Largest admissible step for `state`:
/// `cfl_safety * min(h / max|chi v_x|, 1 / (a + 2 b max u), h^2 / 2 if explicit)`.
pub fn stability_limit(state: &State, cfg: &SolverConfig, p: &ModelParams) -> f64 {
    let h = state.grid().h();
    let drift = p.chi * state.v_x.max_abs();
    let mut limit = if drift > 0.0 { h / drift } else { f64::INFINITY };
    limit = limit.min(1.0 / (p.a + 2.0 * p.b * state.u.max().max(0.0)));
    if cfg.scheme == Scheme::ExplicitEuler {
        limit = limit.min(0.5 * h * h);
    }
    cfg.cfl_safety * limit
}

/// Conservative divergence of the chemotactic flux at every node.
fn chemotactic_divergence(state: &State, p: &ModelParams) -> Vec<f64> {
    let n = state.u.len();
    let mut div = vec![0.0; n];
    if p.chi == 0.0 {
        return div;
    }
    let h = state.grid().h();
    let (u, v) = (state.u.values(), state.v.values());
    let flux: Vec<f64> = (0..n - 1).map(|j| p.chi * 0.5 * (u[j] + u[j + 1]) * (v[j + 1] - v[j]) / h).collect();
    div[0] = 2.0 * flux[0] / h;
    for i in 1..n - 1 {
        div[i] = (flux[i] - flux[i - 1]) / h;
    }
    div[n - 1] = -2.0 * flux[n - 2] / h;
    div
}

/// Exact flow of `u' = u (a - b u)` over `dt`.
#[inline]
pub fn logistic_flow(u: f64, a: f64, b: f64, dt: f64) -> f64 {
    let g = (a * dt).exp_m1();
    u * (1.0 + g) / (1.0 + b * u * g / a)
}

fn neumann_laplacian(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let h2 = h * h;
    let mut lap = vec![0.0; n];
    lap[0] = 2.0 * (u[1] - u[0]) / h2;
    for i in 1..n - 1 {
        lap[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    }
    lap[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) / h2;
    lap
}

/// `(I - dt Lap) x = rhs` with zero-flux ends.
fn implicit_diffusion(rhs: &[f64], h: f64, dt: f64) -> Vec<f64> {
    let n = rhs.len();
    let r = dt / (h * h);
    let mut sub = vec![-r; n];
    let mut sup = vec![-r; n];
    let diag = vec![1.0 + 2.0 * r; n];
    sup[0] = -2.0 * r;
    sub[n - 1] = -2.0 * r;
    solve_tridiagonal(&sub, &diag, &sup, rhs)
}

/// Advance one step of `cfg.dt`.
pub fn step(state: &State, cfg: &SolverConfig, p: &ModelParams) -> Result<State> {
    let limit = stability_limit(state, cfg, p);
    if cfg.dt > limit * (1.0 + 1e-12) {
        return Err(Error::Stability { t: state.t, dt: cfg.dt, limit });
    }
    let dt = cfg.dt;
    let grid = *state.grid();
    let h = grid.h();
    let u = state.u.values();
    let div = chemotactic_divergence(state, p);

    let next: Vec<f64> = match cfg.scheme {
        Scheme::Imex => {
            let rhs: Vec<f64> = u.iter().zip(&div).map(|(&ui, &d)| logistic_flow(ui, p.a, p.b, dt) - dt * d).collect();
            implicit_diffusion(&rhs, h, dt)
        }
        Scheme::ExplicitEuler => {
            let lap = neumann_laplacian(u, h);
            u.iter().zip(&lap).zip(&div).map(|((&ui, &l), &d)| ui + dt * (l - d + ui * (p.a - p.b * ui))).collect()
        }
    };

    let t = state.t + dt;
    let u = ScalarField::new(grid, next)?;
    if let Some((i, value)) = u.undershoot(cfg.neg_tolerance) {
        return Err(Error::Negativity { t, x: grid.x(i), value, tolerance: cfg.neg_tolerance });
    }
    Ok(State::new(t, u, p, cfg.tail))
}

/// Integrate from `u0` to `cfg.t_end`, recording every `observer_stride`-th state and the last.
pub fn simulate(u0: ScalarField, cfg: &SolverConfig, p: &ModelParams, observers: &mut [&mut dyn Observer]) -> Result<Trajectory> {
    cfg.validate()?;
    p.validate()?;
    if !p.global_existence() {
        log::warn!("chi*mu >= b: solutions may blow up; results are outside the supported regime");
    }
    let (n_steps, dt) = cfg.step_plan();
    let step_cfg = SolverConfig { dt, ..*cfg };

    let mut state = State::new(0.0, u0, p, cfg.tail);
    let mut states = Vec::with_capacity(n_steps / cfg.observer_stride + 2);
    let mut record = |state: &State, observers: &mut [&mut dyn Observer]| -> Result<()> {
        for obs in observers.iter_mut() {
            obs.observe(state, p).map_err(|e| Error::AtTime { t: state.t, source: Box::new(e) })?;
        }
        states.push(state.clone());
        Ok(())
    };
    record(&state, observers)?;
    for k in 1..=n_steps {
        let mut next = step(&state, &step_cfg, p).map_err(|e| Error::AtTime { t: state.t, source: Box::new(e) })?;
        // Times from the step count so that recorded times carry no accumulated drift.
        next.t = k as f64 * dt;
        state = next;
        if k % cfg.observer_stride == 0 || k == n_steps {
            record(&state, observers)?;
        }
    }
    Ok(Trajectory { states, config: *cfg, params: *p })
}

/// Initial data classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    /// `height cos^2(pi (x - center) / width)` on `|x - center| < width / 2`, zero elsewhere.
    Compact {
        center: f64,
        width: f64,
        height: f64,
    },
    /// `level` to the left, zero to the right, joined by a `cos^2` ramp of `width` centred at `interface`.
    FrontLike {
        level: f64,
        interface: f64,
        width: f64,
    },
    /// `min{floor, e^{-kappa x}}`.
    Exponential {
        kappa: f64,
        floor: f64,
    },
    Constant {
        level: f64,
    },
}

/// Sample `kind` on `grid`. With `compliance` set, exponential data must have
/// `0 < kappa < sqrt(a)` so that the exponential-data spreading result applies.
pub fn make_initial(kind: &InitialData, grid: &Grid, compliance: Option<&ModelParams>) -> Result<ScalarField> {
    use std::f64::consts::PI;
    let nonneg = |name: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
        }
    };
    let field = match *kind {
        InitialData::Compact { center, width, height } => {
            nonneg("height", height)?;
            if !(width > 0.0) {
                return Err(Error::InvalidParameter(format!("bump width must be > 0, got {width}")));
            }
            ScalarField::from_fn(*grid, |x| {
                let z = (x - center) / width;
                if z.abs() < 0.5 {
                    height * (PI * z).cos().powi(2)
                } else {
                    0.0
                }
            })
        }
        InitialData::FrontLike { level, interface, width } => {
            nonneg("level", level)?;
            nonneg("width", width)?;
            ScalarField::from_fn(*grid, |x| {
                let z = x - (interface - 0.5 * width);
                if z <= 0.0 {
                    level
                } else if z >= width {
                    0.0
                } else {
                    level * (0.5 * PI * z / width).cos().powi(2)
                }
            })
        }
        InitialData::Exponential { kappa, floor } => {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(Error::InvalidParameter(format!("kappa must be > 0, got {kappa}")));
            }
            if !(floor > 0.0 && floor.is_finite()) {
                return Err(Error::InvalidParameter(format!("floor must be > 0, got {floor}")));
            }
            if let Some(p) = compliance {
                if kappa >= p.sqrt_a() {
                    return Err(Error::Hypothesis(format!(
                        "exponential data needs 0 < kappa < sqrt(a) = {} (got kappa = {kappa})",
                        p.sqrt_a()
                    )));
                }
            }
            ScalarField::from_fn(*grid, |x| floor.min((-kappa * x).exp()))
        }
        InitialData::Constant { level } => {
            nonneg("level", level)?;
            ScalarField::constant(*grid, level)
        }
    };
    Ok(field)
}

impl InitialData {
    /// Rightmost point where the data can exceed `theta`; used by the domain-size policy.
    pub fn right_extent(&self, theta: f64) -> f64 {
        match *self {
            InitialData::Compact { center, width, .. } => center + 0.5 * width,
            InitialData::FrontLike { interface, width, .. } => interface + 0.5 * width,
            InitialData::Exponential { kappa, .. } => (-(theta.max(f64::MIN_POSITIVE)).ln() / kappa).max(0.0),
            InitialData::Constant { .. } => f64::INFINITY,
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            InitialData::Compact { height, .. } => height,
            InitialData::FrontLike { level, .. } => level,
            InitialData::Exponential { floor, .. } => floor,
            InitialData::Constant { level } => level,
        }
    }
}

/// Half-length needed so a front leaving `extent` at `speed` stays `buffer + 20/kappa_min`
/// away from the boundary until `t_end`.
pub fn required_half_length(extent: f64, speed: f64, t_end: f64, kappa_min: f64, buffer: f64) -> f64 {
    extent + speed * t_end + 20.0 / kappa_min + buffer
}

/// Records the worst excess over `max{max u0, a/(b - chi mu)}`.
#[derive(Debug, Clone)]
pub struct SupNormMonitor {
    pub bound: f64,
    pub worst_excess: f64,
}

impl SupNormMonitor {
    pub fn new(u0: &ScalarField, p: &ModelParams) -> Result<Self> {
        Ok(SupNormMonitor { bound: u0.max().max(p.damped_capacity()?), worst_excess: f64::NEG_INFINITY })
    }

    pub fn holds(&self, tolerance: f64) -> bool {
        self.worst_excess <= tolerance
    }
}

impl Observer for SupNormMonitor {
    fn observe(&mut self, state: &State, _p: &ModelParams) -> Result<()> {
        self.worst_excess = self.worst_excess.max(state.u.max() - self.bound);
        Ok(())
    }
}

/// Records the worst normalised excess of `|v_x| - sqrt(lambda) v` away from the boundaries.
#[derive(Debug, Clone)]
pub struct GradientLawMonitor {
    pub buffer: f64,
    pub worst: f64,
}

impl GradientLawMonitor {
    pub fn new(p: &ModelParams) -> Self {
        GradientLawMonitor { buffer: 10.0 / p.sqrt_lambda(), worst: f64::NEG_INFINITY }
    }
}

impl Observer for GradientLawMonitor {
    fn observe(&mut self, state: &State, p: &ModelParams) -> Result<()> {
        if state.v.max() > 0.0 {
            let range = state.grid().interior(self.buffer);
            let excess = crate::kernel::gradient_law_excess(&state.v, &state.v_x, p, range);
            self.worst = self.worst.max(excess);
        }
        Ok(())
    }
}

/// Records `max u / (M e^{-kappa (|x| - c_kappa t)})` over the run.
#[derive(Debug, Clone)]
pub struct EnvelopeMonitor {
    pub m: f64,
    pub kappa: f64,
    pub speed: f64,
    pub worst_ratio: f64,
}

impl EnvelopeMonitor {
    pub fn new(m: f64, kappa: f64, p: &ModelParams) -> Self {
        EnvelopeMonitor { m, kappa, speed: p.c_kappa(kappa), worst_ratio: 0.0 }
    }
}

impl Observer for EnvelopeMonitor {
    fn observe(&mut self, state: &State, _p: &ModelParams) -> Result<()> {
        let g = state.grid();
        for (i, &u) in state.u.values().iter().enumerate() {
            let env = self.m * (-self.kappa * (g.x(i).abs() - self.speed * state.t)).exp();
            if env > 0.0 {
                self.worst_ratio = self.worst_ratio.max(u / env);
            } else if u > 0.0 {
                self.worst_ratio = f64::INFINITY;
            }
        }
        Ok(())
    }
}
