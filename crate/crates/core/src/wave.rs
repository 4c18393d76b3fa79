//! Traveling-wave profiles as fixed points of a frozen-coefficient relaxation.
//!
//! For a profile candidate `u` with `0 <= u <= U+`, freeze `Psi = Psi(.; u)` and run
//!
//! ```text
//! U_t = U_xx + (c_kappa - chi Psi_x) U_x + (a - chi lambda Psi - (b - chi mu) U) U,   U(0) = U+
//! ```
//!
//! to steady state. `U+ = min{a/(b - chi mu), e^{-kappa x}}` is a supersolution, so `U`
//! decreases monotonically in time; `U- = max{0, e^{-kappa x} - D e^{-kt x}}` is a
//! subsolution for large enough `D`. The steady state defines the map whose fixed
//! point is the wave profile.
//!
//! Discretisation: second differences, central first differences, a Neumann end on
//! the left and `U = U+` on the right. The advection speed is the grid-consistent
//! `c_h` for which `e^{-kappa x}` solves the discrete linearisation exactly; it
//! differs from `c_kappa` by `O(h^2)` and keeps the envelopes exact discrete
//! super- and subsolutions in the far tail.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::kernel::{psi_fast, TailPolicy};
use crate::solver::{simulate, SolverConfig};
use crate::theory::ModelParams;
use crate::tridiag::solve_tridiagonal;

/// Upper and lower envelopes of the admissible profile set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveEnvelopes {
    pub kappa: f64,
    pub kappa_tilde: f64,
    pub d: f64,
    /// `a / (b - chi mu)`.
    pub cap: f64,
    /// Envelopes are functions of `x - origin`.
    pub origin: f64,
}

impl WaveEnvelopes {
    pub fn new(p: &ModelParams, kappa: f64, kappa_tilde: Option<f64>, d: f64, origin: f64) -> Result<Self> {
        let cap = p.damped_capacity()?;
        let k_max = p.sqrt_a().min(p.sqrt_lambda());
        if !(kappa > 0.0 && kappa < k_max) {
            return Err(Error::Hypothesis(format!("wave decay rate needs 0 < kappa < min(sqrt a, sqrt lambda) = {k_max}, got {kappa}")));
        }
        let kappa_tilde = kappa_tilde.unwrap_or_else(|| Self::default_kappa_tilde(p, kappa));
        if !(kappa < kappa_tilde && kappa_tilde < k_max && kappa_tilde < 2.0 * kappa) {
            return Err(Error::Hypothesis(format!(
                "need kappa < kappa_tilde < min(2 kappa, sqrt a, sqrt lambda); got kappa = {kappa}, kappa_tilde = {kappa_tilde}"
            )));
        }
        if !(d >= 1.0) {
            return Err(Error::InvalidParameter(format!("D must be >= 1, got {d}")));
        }
        Ok(WaveEnvelopes { kappa, kappa_tilde, d, cap, origin })
    }

    /// Midpoint of the admissible interval `(kappa, min{2 kappa, sqrt a, sqrt lambda})`.
    pub fn default_kappa_tilde(p: &ModelParams, kappa: f64) -> f64 {
        kappa + 0.5 * ((2.0 * kappa).min(p.sqrt_a()).min(p.sqrt_lambda()) - kappa)
    }

    pub fn with_d(self, d: f64) -> Self {
        WaveEnvelopes { d, ..self }
    }

    fn phi(&self, x: f64, rate: f64) -> f64 {
        (-rate * (x - self.origin)).exp()
    }

    pub fn upper(&self, x: f64) -> f64 {
        self.cap.min(self.phi(x, self.kappa))
    }

    /// `e^{-kappa z} - D e^{-kt z}` before clipping at zero.
    pub fn lower_raw(&self, x: f64) -> f64 {
        self.phi(x, self.kappa) - self.d * self.phi(x, self.kappa_tilde)
    }

    pub fn lower(&self, x: f64) -> f64 {
        self.lower_raw(x).max(0.0)
    }

    /// `U-` is positive exactly to the right of this point.
    pub fn lower_support_start(&self) -> f64 {
        self.origin + self.d.ln() / (self.kappa_tilde - self.kappa)
    }

    /// Two-mode upper bound `min{D, e^{-kappa z} + D e^{-kt z}}`.
    pub fn two_mode_upper(&self, x: f64) -> f64 {
        self.d.min(self.phi(x, self.kappa) + self.d * self.phi(x, self.kappa_tilde))
    }

    /// Maximiser of `e^{-kappa z} - D e^{-kt z}`.
    pub fn two_mode_peak(&self) -> f64 {
        self.origin + (self.d * self.kappa_tilde / self.kappa).ln() / (self.kappa_tilde - self.kappa)
    }

    /// `e^{-kappa z} - D e^{-kt z}` right of its maximiser, held at the maximum to the left.
    pub fn two_mode_lower(&self, x: f64) -> f64 {
        self.lower_raw(x.max(self.two_mode_peak()))
    }

    pub fn upper_field(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_fn(*grid, |x| self.upper(x))
    }

    pub fn lower_field(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_fn(*grid, |x| self.lower(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointConfig {
    /// Relaxation stops once `sup |U(t + dt) - U(t)| / dt` falls below this.
    pub steady_tol: f64,
    /// Outer iteration stops once successive iterates differ by less than this in sup norm.
    pub fp_tol: f64,
    pub max_outer_iters: usize,
    pub relax_dt: f64,
    pub relax_horizon: f64,
    /// Initial damping weight in `(0, 1]`; halved whenever the outer gap grows.
    pub damping: f64,
    /// Allowed pointwise increase per relaxation step before declaring non-monotone.
    pub monotone_tol: f64,
    /// Slack for the envelope sandwich checks.
    pub envelope_tol: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            steady_tol: 1e-8,
            fp_tol: 1e-6,
            max_outer_iters: 50,
            relax_dt: 0.5,
            relax_horizon: 5000.0,
            damping: 1.0,
            monotone_tol: 1e-9,
            envelope_tol: 1e-9,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("steady_tol", self.steady_tol),
            ("fp_tol", self.fp_tol),
            ("relax_dt", self.relax_dt),
            ("relax_horizon", self.relax_horizon),
            ("monotone_tol", self.monotone_tol),
            ("envelope_tol", self.envelope_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!("damping must be in (0, 1], got {}", self.damping)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter("max_outer_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Advection speed making `e^{-kappa x}` an exact solution of the discrete linearisation at zero.
pub fn grid_consistent_speed(a: f64, kappa: f64, h: f64) -> f64 {
    let kh = kappa * h;
    (2.0 * (kh.cosh() - 1.0) / (h * h) + a) * h / kh.sinh()
}

/// Frozen-coefficient operator `A_u` on a grid.
#[derive(Debug, Clone)]
pub struct FrozenOperator {
    grid: Grid,
    /// `c_h - chi Psi_x`
    drift: Vec<f64>,
    /// `a - chi lambda Psi`
    growth: Vec<f64>,
    /// `b - chi mu`
    beta: f64,
    right_value: f64,
    pub psi: ScalarField,
    pub psi_x: ScalarField,
}

impl FrozenOperator {
    pub fn new(u_frozen: &ScalarField, env: &WaveEnvelopes, p: &ModelParams) -> Result<Self> {
        let grid = *u_frozen.grid();
        let h = grid.h();
        let c_h = grid_consistent_speed(p.a, env.kappa, h);
        let (psi, psi_x) = psi_fast(u_frozen, p, TailPolicy::ConstantLeft);
        let drift: Vec<f64> = psi_x.values().iter().map(|&d| c_h - p.chi * d).collect();
        let worst = drift.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if worst * h > 2.0 {
            return Err(Error::InvalidParameter(format!(
                "grid too coarse for drift {worst}: need h <= {} for a monotone scheme",
                2.0 / worst
            )));
        }
        let growth = psi.values().iter().map(|&v| p.a - p.chi * p.lambda * v).collect();
        Ok(FrozenOperator { grid, drift, growth, beta: p.b - p.chi_mu(), right_value: env.upper(grid.right()), psi, psi_x })
    }

    /// `A_u(w)` at interior node `i` with the discrete stencils.
    pub fn apply_at(&self, w: &[f64], i: usize) -> f64 {
        let h = self.grid.h();
        let lap = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h);
        let grad = (w[i + 1] - w[i - 1]) / (2.0 * h);
        lap + self.drift[i] * grad + (self.growth[i] - self.beta * w[i]) * w[i]
    }

    /// One linearly implicit step: diffusion, advection, the negative part of the
    /// frozen growth and the logistic damping implicit; the positive growth explicit.
    fn step(&self, w: &[f64], dt: f64) -> Vec<f64> {
        let n = w.len();
        let h = self.grid.h();
        let r = dt / (h * h);
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n - 1 {
            let g = self.growth[i];
            diag[i] = 1.0 + 2.0 * r + dt * ((-g).max(0.0) + self.beta * w[i]);
            rhs[i] = (1.0 + dt * g.max(0.0)) * w[i];
            if i == 0 {
                sup[i] = -2.0 * r;
            } else {
                let adv = dt * self.drift[i] / (2.0 * h);
                sub[i] = -r + adv;
                sup[i] = -r - adv;
            }
        }
        diag[n - 1] = 1.0;
        rhs[n - 1] = self.right_value;
        solve_tridiagonal(&sub, &diag, &sup, &rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxStats {
    pub steps: usize,
    pub time: f64,
    pub final_rate: f64,
    /// Largest pointwise increase seen between steps (nonpositive when monotone).
    pub max_increase: f64,
}

fn relax_with(op: &FrozenOperator, env: &WaveEnvelopes, cfg: &FixedPointConfig) -> Result<(ScalarField, RelaxStats)> {
    let grid = op.grid;
    let mut w = env.upper_field(&grid).into_values();
    let dt = cfg.relax_dt;
    let mut stats = RelaxStats { steps: 0, time: 0.0, final_rate: f64::INFINITY, max_increase: f64::NEG_INFINITY };
    while stats.time < cfg.relax_horizon {
        let next = op.step(&w, dt);
        let (mut rate, mut inc) = (0.0_f64, f64::NEG_INFINITY);
        for (a, b) in next.iter().zip(&w) {
            rate = rate.max((a - b).abs());
            inc = inc.max(a - b);
        }
        rate /= dt;
        stats.steps += 1;
        stats.time = stats.steps as f64 * dt;
        stats.final_rate = rate;
        stats.max_increase = stats.max_increase.max(inc);
        if inc > cfg.monotone_tol {
            return Err(Error::NonMonotone(format!(
                "relaxation increased by {inc:e} at t = {}; refine the grid or shorten relax_dt",
                stats.time
            )));
        }
        w = next;
        if rate < cfg.steady_tol {
            return Ok((ScalarField::new(grid, w)?, stats));
        }
    }
    Err(Error::NoConvergence(format!("relaxation rate {:e} still above {:e} at t = {}", stats.final_rate, cfg.steady_tol, stats.time)))
}

/// Steady state of the frozen equation started from `U+`.
///
/// `u_frozen` is clamped into `[0, U+]` first (with a warning). The result is
/// checked against `U-` with `cfg.envelope_tol`.
pub fn relax_to_steady(
    u_frozen: &ScalarField,
    env: &WaveEnvelopes,
    p: &ModelParams,
    cfg: &FixedPointConfig,
) -> Result<(ScalarField, RelaxStats)> {
    cfg.validate()?;
    let grid = *u_frozen.grid();
    let clamped = u_frozen.map(|x, u| u.clamp(0.0, env.upper(x)));
    let moved = clamped.sup_distance(u_frozen)?;
    if moved > 0.0 {
        log::warn!("frozen profile left the envelope by {moved:e}; clamped");
    }
    let op = FrozenOperator::new(&clamped, env, p)?;
    let (w, stats) = relax_with(&op, env, cfg)?;
    let below = grid.nodes().zip(w.values()).map(|(x, &v)| env.lower(x) - v).fold(f64::NEG_INFINITY, f64::max);
    if below > cfg.envelope_tol {
        return Err(Error::Envelope(format!("relaxed profile fell {below:e} below the lower envelope")));
    }
    Ok((w, stats))
}

/// Whether `U-` (with the envelope's `D`) is a discrete subsolution of `A_u` for every `u` in
/// the admissible set, using `Psi(.; U+)` as the worst case, and lies below `U+`.
pub fn lower_envelope_is_subsolution(env: &WaveEnvelopes, grid: &Grid, p: &ModelParams) -> bool {
    let h = grid.h();
    let c_h = grid_consistent_speed(p.a, env.kappa, h);
    let (psi_up, _) = psi_fast(&env.upper_field(grid), p, TailPolicy::ConstantLeft);
    let beta = p.b - p.chi_mu();
    let s = p.sqrt_lambda();
    let phi: Vec<f64> = grid.nodes().map(|x| env.lower_raw(x)).collect();
    if grid.nodes().zip(&phi).any(|(x, &f)| f > env.upper(x)) {
        return false;
    }
    let scale = 4.0 / (h * h) + c_h.abs() / h + p.a;
    (1..phi.len() - 1).filter(|&i| phi[i] > 0.0).all(|i| {
        let lap = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h);
        let grad = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
        let linear = lap + c_h * grad + p.a * phi[i];
        let worst = linear - p.chi * psi_up[i] * (s * grad.abs() + p.lambda * phi[i]) - beta * phi[i] * phi[i];
        let rounding = 64.0 * f64::EPSILON * scale * (-env.kappa * (grid.x(i) - env.origin)).exp();
        worst >= -rounding
    })
}

/// Smallest `D = 2^k` making `U-` a discrete subsolution.
pub fn select_d(env: &WaveEnvelopes, grid: &Grid, p: &ModelParams) -> Result<f64> {
    let mut d = 1.0;
    while d <= f64::powi(2.0, 30) {
        if lower_envelope_is_subsolution(&env.with_d(d), grid, p) {
            return Ok(d);
        }
        d *= 2.0;
    }
    Err(Error::Envelope("no D <= 2^30 makes the lower envelope a subsolution".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileDiagnostics {
    /// Max interior residual of the profile equation with fourth-order stencils.
    pub residual: f64,
    /// Max `|U / e^{-kappa z} - 1|` over the right fit window.
    pub right_tail_deviation: f64,
    pub right_window: (f64, f64),
    pub left_probe: f64,
    pub left_value: f64,
    /// `|U(left_probe) - a/b|`.
    pub left_deviation: f64,
    /// `min(U+ - U, U - U-)`; negative means the envelope is violated.
    pub envelope_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterStep {
    pub iteration: usize,
    pub gap: f64,
    pub damping: f64,
    pub relax_steps: usize,
}

#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub kappa: f64,
    pub speed: f64,
    pub u: ScalarField,
    pub v: ScalarField,
    pub v_x: ScalarField,
    pub envelopes: WaveEnvelopes,
    pub history: Vec<OuterStep>,
    pub diagnostics: ProfileDiagnostics,
}

impl WaveProfile {
    pub fn outer_iterations(&self) -> usize {
        self.history.len()
    }
}

/// Minimum half-length for a wave solve at decay rate `kappa`.
pub fn min_half_length(kappa: f64) -> f64 {
    40.0 / kappa
}

/// Fixed point of `u -> relax_to_steady(u)`, iterated from `U+` with damping.
pub fn fixed_point_wave(kappa: f64, p: &ModelParams, grid: &Grid, origin: f64, cfg: &FixedPointConfig) -> Result<WaveProfile> {
    cfg.validate()?;
    p.require_global_existence()?;
    if grid.half_length() < min_half_length(kappa) * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "wave domain half-length {} shorter than 40/kappa = {}",
            grid.half_length(),
            min_half_length(kappa)
        )));
    }
    let base = WaveEnvelopes::new(p, kappa, None, 1.0, origin)?;
    let env = base.with_d(select_d(&base, grid, p)?);

    let upper = env.upper_field(grid);
    let lower = env.lower_field(grid);
    let mut u = upper.clone();
    let mut omega = cfg.damping;
    let mut prev_gap = f64::INFINITY;
    let mut history = Vec::new();
    for iteration in 1..=cfg.max_outer_iters {
        let (relaxed, stats) = relax_to_steady(&u, &env, p, cfg)?;
        let next: Vec<f64> = u.values().iter().zip(relaxed.values()).map(|(a, b)| (1.0 - omega) * a + omega * b).collect();
        let next = ScalarField::new(*grid, next)?;
        let gap = next.sup_distance(&u)?;
        for i in 0..grid.n_nodes() {
            if next[i] > upper[i] + cfg.envelope_tol || next[i] < lower[i] - cfg.envelope_tol {
                return Err(Error::Envelope(format!(
                    "iterate {iteration} leaves [U-, U+] at x = {} (value {}, bounds [{}, {}])",
                    grid.x(i),
                    next[i],
                    lower[i],
                    upper[i]
                )));
            }
        }
        history.push(OuterStep { iteration, gap, damping: omega, relax_steps: stats.steps });
        log::debug!("outer {iteration}: gap {gap:e}, damping {omega}, {} relaxation steps", stats.steps);
        u = next;
        if gap < cfg.fp_tol {
            let (v, v_x) = psi_fast(&u, p, TailPolicy::ConstantLeft);
            let mut profile = WaveProfile {
                kappa,
                speed: p.c_kappa(kappa),
                u,
                v,
                v_x,
                envelopes: env,
                history,
                diagnostics: ProfileDiagnostics {
                    residual: f64::NAN,
                    right_tail_deviation: f64::NAN,
                    right_window: (f64::NAN, f64::NAN),
                    left_probe: f64::NAN,
                    left_value: f64::NAN,
                    left_deviation: f64::NAN,
                    envelope_margin: f64::NAN,
                },
            };
            profile.diagnostics = verify_profile(&profile.u, &env, p);
            return Ok(profile);
        }
        if gap > prev_gap {
            omega = (0.5 * omega).max(1.0 / 64.0);
        }
        prev_gap = gap;
    }
    Err(Error::NoConvergence(format!("outer iteration gap {:e} above {:e} after {} iterations", prev_gap, cfg.fp_tol, cfg.max_outer_iters)))
}

/// Diagnostics of a candidate profile `u` for the envelope set `env`. Never fails.
pub fn verify_profile(u: &ScalarField, env: &WaveEnvelopes, p: &ModelParams) -> ProfileDiagnostics {
    let grid = *u.grid();
    let h = grid.h();
    let w = u.values();
    let n = w.len();
    let (psi, psi_x) = psi_fast(u, p, TailPolicy::ConstantLeft);
    let ck = p.c_kappa(env.kappa);
    let beta = p.b - p.chi_mu();

    let residual = (2..n.saturating_sub(2))
        .map(|i| {
            let uxx = (-w[i + 2] + 16.0 * w[i + 1] - 30.0 * w[i] + 16.0 * w[i - 1] - w[i - 2]) / (12.0 * h * h);
            let ux = (-w[i + 2] + 8.0 * w[i + 1] - 8.0 * w[i - 1] + w[i - 2]) / (12.0 * h);
            (uxx + (ck - p.chi * psi_x[i]) * ux + (p.a - p.chi * p.lambda * psi[i] - beta * w[i]) * w[i]).abs()
        })
        .fold(0.0, f64::max);

    let buffer = 10.0 / p.sqrt_lambda();
    let right_window = (env.origin + 0.5 * (grid.right() - env.origin), grid.right() - buffer);
    let right_tail_deviation = grid
        .nodes()
        .zip(w)
        .filter(|(x, _)| *x >= right_window.0 && *x <= right_window.1)
        .map(|(x, &v)| (v / (-env.kappa * (x - env.origin)).exp() - 1.0).abs())
        .fold(0.0, f64::max);

    let left_probe = grid.left() + buffer;
    let left_value = u.interpolate(left_probe);
    let envelope_margin = grid.nodes().zip(w).map(|(x, &v)| (env.upper(x) - v).min(v - env.lower(x))).fold(f64::INFINITY, f64::min);

    ProfileDiagnostics {
        residual,
        right_tail_deviation,
        right_window,
        left_probe,
        left_value,
        left_deviation: (left_value - p.carrying_capacity()).abs(),
        envelope_margin,
    }
}

/// Evolve `w.u` in the time-dependent solver for time `t` and return
/// `sup |u(t, x) - U(x - c t)| / sup U` over the part of the grid that stays clear of
/// both boundary buffers after the shift.
pub fn advected_mismatch(w: &WaveProfile, p: &ModelParams, t: f64, dt: f64) -> Result<f64> {
    let grid = *w.u.grid();
    let cfg = SolverConfig { dt, t_end: t, tail: TailPolicy::ConstantLeft, observer_stride: usize::MAX, ..SolverConfig::default() };
    let traj = simulate(w.u.clone(), &cfg, p, &mut [])?;
    let end = traj.last();
    let shift = w.speed * end.t;
    let buffer = 10.0 / p.sqrt_lambda();
    let (lo, hi) = (grid.left() + buffer + shift, grid.right() - buffer);
    if lo >= hi {
        return Err(Error::InsufficientData(format!("shift {shift} leaves no comparison window on this grid")));
    }
    let worst = grid
        .nodes()
        .zip(end.u.values())
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .map(|(x, &u)| (u - w.u.interpolate(x - shift)).abs())
        .fold(0.0, f64::max);
    Ok(worst / w.u.max())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ScanStatus {
    /// No traveling wave is slower than `2 sqrt(a)`; nothing is solved.
    ExcludedBelowMinimalSpeed,
    /// Between `2 sqrt(a)` and `c**` when `lambda < a`: existence is open, not attempted.
    OpenRange,
    Converged,
    /// At `c**` itself: solved just inside the admissible range; result is sensitive.
    BoundarySensitive {
        converged: bool,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub c: f64,
    pub kappa: Option<f64>,
    pub status: ScanStatus,
    pub outer_iterations: Option<usize>,
    pub diagnostics: Option<ProfileDiagnostics>,
}

/// Attempt a wave at each requested speed. Grids use spacing `h` and half-length
/// `max(min_half, 40/kappa)`. Speeds are solved concurrently.
pub fn min_speed_scan(p: &ModelParams, speeds: &[f64], h: f64, min_half: f64, cfg: &FixedPointConfig) -> Result<Vec<ScanEntry>> {
    let consts = p.speed_constants()?;
    let k_max = p.sqrt_a().min(p.sqrt_lambda());
    let solve = |kappa: f64| -> Result<WaveProfile> {
        let half = min_half.max(min_half_length(kappa));
        let grid = Grid::with_spacing(half, h)?;
        fixed_point_wave(kappa, p, &grid, 0.0, cfg)
    };
    let entries = speeds
        .par_iter()
        .map(|&c| {
            let blank =
                ScanEntry { c, kappa: None, status: ScanStatus::ExcludedBelowMinimalSpeed, outer_iterations: None, diagnostics: None };
            if c < consts.c0_star {
                return blank;
            }
            let rel = 1e-9 * consts.c_star_star.max(1.0);
            if c < consts.c_star_star - rel {
                return ScanEntry { status: ScanStatus::OpenRange, ..blank };
            }
            let kappa = p.kappa_for_speed(c).expect("c >= 2 sqrt(a)");
            if kappa >= k_max * (1.0 - 1e-3) || (c - consts.c_star_star).abs() <= rel {
                // Envelopes need kappa < kappa_tilde < k_max; step just inside.
                let kb = k_max * (1.0 - 1e-3);
                return match solve(kb) {
                    Ok(w) => ScanEntry {
                        kappa: Some(kb),
                        status: ScanStatus::BoundarySensitive { converged: true },
                        outer_iterations: Some(w.outer_iterations()),
                        diagnostics: Some(w.diagnostics),
                        ..blank
                    },
                    Err(e) => {
                        log::warn!("boundary speed {c}: {e}");
                        ScanEntry { kappa: Some(kb), status: ScanStatus::BoundarySensitive { converged: false }, ..blank }
                    }
                };
            }
            match solve(kappa) {
                Ok(w) => ScanEntry {
                    kappa: Some(kappa),
                    status: ScanStatus::Converged,
                    outer_iterations: Some(w.outer_iterations()),
                    diagnostics: Some(w.diagnostics),
                    ..blank
                },
                Err(e) => ScanEntry { kappa: Some(kappa), status: ScanStatus::Failed { reason: e.to_string() }, ..blank },
            }
        })
        .collect();
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(chi: f64) -> ModelParams {
        ModelParams::new(chi, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn envelopes_are_ordered() {
        let p = params(0.3);
        let env = WaveEnvelopes::new(&p, 0.5, None, 4.0, 0.0).unwrap();
        assert!((env.kappa_tilde - 0.75).abs() < 1e-15);
        let start = env.lower_support_start();
        for k in -400..400 {
            let x = 0.25 * k as f64;
            let (lo, hi) = (env.lower(x), env.upper(x));
            assert!(0.0 <= lo && lo <= hi);
            if x > start + 1e-9 {
                assert!(lo > 0.0);
            } else if x < start - 1e-9 {
                assert_eq!(lo, 0.0);
            }
            assert!(env.two_mode_lower(x) <= env.two_mode_upper(x));
        }
        let peak = env.two_mode_peak();
        assert!(env.lower_raw(peak) >= env.lower_raw(peak + 0.01));
        assert!(env.lower_raw(peak) >= env.lower_raw(peak - 0.01));
    }

    #[test]
    fn envelope_parameters_are_checked() {
        let p = params(0.3);
        assert!(WaveEnvelopes::new(&p, 1.0, None, 1.0, 0.0).is_err());
        assert!(WaveEnvelopes::new(&p, 0.4, Some(0.9), 1.0, 0.0).is_err());
        assert!(WaveEnvelopes::new(&p, 0.5, None, 0.5, 0.0).is_err());
        assert!(WaveEnvelopes::new(&ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.5, None, 1.0, 0.0).is_err());
    }

    #[test]
    fn grid_consistent_speed_is_second_order() {
        let (a, k) = (1.0, 0.5);
        let e1 = grid_consistent_speed(a, k, 0.1) - crate::theory::c_kappa(a, k);
        let e2 = grid_consistent_speed(a, k, 0.05) - crate::theory::c_kappa(a, k);
        assert!((e1 / e2 - 4.0).abs() < 0.01);
    }

    #[test]
    fn upper_envelope_is_not_a_solution() {
        let p = params(0.3);
        let g = Grid::new(80.0, 1600).unwrap();
        let env = WaveEnvelopes::new(&p, 0.5, None, 1.0, 0.0).unwrap();
        let d = verify_profile(&env.upper_field(&g), &env, &p);
        assert!(d.residual > 1e-2);
        assert_eq!(d.envelope_margin, 0.0);
    }

    #[test]
    fn relaxation_decreases_and_stays_above_lower_envelope() {
        let p = params(0.3);
        let g = Grid::new(80.0, 1600).unwrap();
        let base = WaveEnvelopes::new(&p, 0.5, None, 1.0, 0.0).unwrap();
        let env = base.with_d(select_d(&base, &g, &p).unwrap());
        let frozen = env.upper_field(&g).map(|x, u| 0.7 * u * (1.0 + 0.2 * (0.3 * x).sin()));
        let (w, stats) = relax_to_steady(&frozen, &env, &p, &FixedPointConfig::default()).unwrap();
        assert!(stats.max_increase <= 1e-9);
        assert!(stats.final_rate < 1e-8);
        for (x, &v) in g.nodes().zip(w.values()) {
            assert!(v <= env.upper(x) + 1e-12 && v >= env.lower(x) - 1e-9);
        }
    }

    #[test]
    fn fisher_kpp_wave() {
        let p = params(0.0);
        let g = Grid::new(80.0, 1600).unwrap();
        let w = fixed_point_wave(0.5, &p, &g, 0.0, &FixedPointConfig::default()).unwrap();
        assert_eq!(w.speed, 2.5);
        assert!(w.outer_iterations() <= 2);
        assert!(w.diagnostics.right_tail_deviation < 1e-3);
        assert!(w.diagnostics.left_deviation < 1e-6);
        assert!(w.diagnostics.envelope_margin >= -1e-9);
    }

    #[test]
    fn scan_labels_speeds() {
        let p = params(0.1);
        let entries = min_speed_scan(&p, &[1.9, 2.0, 2.5], 0.1, 0.0, &FixedPointConfig::default()).unwrap();
        assert_eq!(entries[0].status, ScanStatus::ExcludedBelowMinimalSpeed);
        assert!(matches!(entries[1].status, ScanStatus::BoundarySensitive { .. }));
        assert_eq!(entries[2].status, ScanStatus::Converged);
        assert!((entries[2].kappa.unwrap() - 0.5).abs() < 1e-12);

        let q = ModelParams::new(0.1, 4.0, 1.0, 1.0, 1.0).unwrap();
        let e = min_speed_scan(&q, &[4.5], 0.1, 0.0, &FixedPointConfig::default()).unwrap();
        assert_eq!(e[0].status, ScanStatus::OpenRange);
    }

    #[test]
    fn profile_travels_at_its_speed() {
        let p = params(0.3);
        let g = Grid::new(80.0, 1600).unwrap();
        let w = fixed_point_wave(0.5, &p, &g, 0.0, &FixedPointConfig::default()).unwrap();
        let mismatch = advected_mismatch(&w, &p, 10.0, 0.01).unwrap();
        assert!(mismatch < 0.02, "{mismatch}");
    }

    #[test]
    fn shifted_grid_gives_shifted_profile() {
        let p = params(0.3);
        let cfg = FixedPointConfig::default();
        let base = fixed_point_wave(0.5, &p, &Grid::new(80.0, 1600).unwrap(), 0.0, &cfg).unwrap();
        let dx = 7.0;
        let moved = fixed_point_wave(0.5, &p, &Grid::centered_at(80.0, 1600, dx).unwrap(), dx, &cfg).unwrap();
        let worst = (0..base.u.len()).map(|i| (moved.u[i] - base.u[i]).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn off_grid_origin_shift() {
        let p = params(0.3);
        let g = Grid::new(80.0, 1600).unwrap();
        let cfg = FixedPointConfig::default();
        let base = fixed_point_wave(0.5, &p, &g, 0.0, &cfg).unwrap();
        let dx = 3.03;
        let moved = fixed_point_wave(0.5, &p, &g, dx, &cfg).unwrap();
        let worst = g
            .nodes()
            .zip(moved.u.values())
            .filter(|(x, _)| x.abs() < 40.0)
            .map(|(x, &u)| (u - base.u.interpolate(x - dx)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }
}
