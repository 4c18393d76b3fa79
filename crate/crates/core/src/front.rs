//! Front positions, speeds and tail diagnostics extracted from trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::solver::{State, Trajectory};
use crate::theory::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Level-set extremities at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontSample {
    pub t: f64,
    pub left: f64,
    pub right: f64,
    /// The level set reached into the boundary buffer; positions were clamped to its edge.
    pub left_clipped: bool,
    pub right_clipped: bool,
}

impl FrontSample {
    pub fn position(&self, side: Side) -> (f64, bool) {
        match side {
            Side::Left => (self.left, self.left_clipped),
            Side::Right => (self.right, self.right_clipped),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontTrace {
    pub theta: f64,
    pub buffer: f64,
    pub samples: Vec<FrontSample>,
    /// Times at which `{u >= theta}` was empty.
    pub omitted: Vec<f64>,
}

/// Extremities of `{u >= theta}` with linear interpolation between the bracketing nodes.
/// `None` when the set is empty.
pub fn level_extent(field: &ScalarField, theta: f64, buffer: f64) -> Option<(f64, bool, f64, bool)> {
    let g = field.grid();
    let u = field.values();
    let last = u.len() - 1;
    let lo_edge = g.left() + buffer;
    let hi_edge = g.right() - buffer;

    let i_right = u.iter().rposition(|&v| v >= theta)?;
    let i_left = u.iter().position(|&v| v >= theta)?;

    let (mut right, mut right_clipped) = if i_right == last {
        (hi_edge, true)
    } else {
        let (a, b) = (u[i_right], u[i_right + 1]);
        (g.x(i_right) + g.h() * (a - theta) / (a - b), false)
    };
    if right > hi_edge {
        right = hi_edge;
        right_clipped = true;
    }
    let (mut left, mut left_clipped) = if i_left == 0 {
        (lo_edge, true)
    } else {
        let (a, b) = (u[i_left], u[i_left - 1]);
        (g.x(i_left) - g.h() * (a - theta) / (a - b), false)
    };
    if left < lo_edge {
        left = lo_edge;
        left_clipped = true;
    }
    Some((left, left_clipped, right, right_clipped))
}

impl FrontTrace {
    pub fn from_fields<'a>(fields: impl IntoIterator<Item = (f64, &'a ScalarField)>, theta: f64, buffer: f64) -> FrontTrace {
        let mut samples = Vec::new();
        let mut omitted = Vec::new();
        for (t, field) in fields {
            match level_extent(field, theta, buffer) {
                Some((left, left_clipped, right, right_clipped)) => {
                    samples.push(FrontSample { t, left, right, left_clipped, right_clipped })
                }
                None => omitted.push(t),
            }
        }
        if !omitted.is_empty() {
            log::warn!("level {theta} empty at {} recorded times", omitted.len());
        }
        FrontTrace { theta, buffer, samples, omitted }
    }

    /// `(t, position)` pairs usable for fitting on `side`.
    pub fn usable(&self, side: Side) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().filter_map(move |s| {
            let (x, clipped) = s.position(side);
            (!clipped).then_some((s.t, x))
        })
    }

    pub fn t_range(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }
}

/// Default boundary buffer `10 / sqrt(lambda)`.
pub fn default_buffer(p: &ModelParams) -> f64 {
    10.0 / p.sqrt_lambda()
}

/// Track the `theta` level through a trajectory. `theta` must lie in `(0, a/b)`.
pub fn track_level(traj: &Trajectory, theta: f64) -> Result<FrontTrace> {
    let p = &traj.params;
    if !(theta > 0.0 && theta < p.carrying_capacity()) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, a/b) = (0, {}), got {theta}", p.carrying_capacity())));
    }
    Ok(FrontTrace::from_fields(traj.states.iter().map(|s| (s.t, &s.u)), theta, default_buffer(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub c_hat: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n: usize,
}

/// Ordinary least squares of `y` against `x`: `(slope, intercept, slope stderr, max |residual|)`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = points.iter().map(|p| p.1 - intercept - slope * p.0);
    let (ssr, worst) = residuals.fold((0.0, 0.0_f64), |(s, w), r| (s + r * r, w.max(r.abs())));
    let stderr = if points.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, intercept, stderr, worst)
}

/// Least-squares speed of one side of the front. Without `window` the last half of
/// the trace is used. Needs at least 10 unclipped samples.
pub fn estimate_speed(trace: &FrontTrace, side: Side, window: Option<(f64, f64)>) -> Result<SpeedEstimate> {
    let window = match window {
        Some(w) => w,
        None => {
            let (t0, t1) = trace.t_range().ok_or_else(|| Error::InsufficientData("empty front trace".into()))?;
            (0.5 * (t0 + t1), t1)
        }
    };
    let pts: Vec<(f64, f64)> = trace.usable(side).filter(|&(t, _)| t >= window.0 - 1e-9 && t <= window.1 + 1e-9).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} usable {side:?} front samples in [{}, {}], need 10",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let (c_hat, intercept, stderr, _) = least_squares(&pts);
    Ok(SpeedEstimate { c_hat, intercept, stderr, window, n: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadingInterval {
    pub c_minus: f64,
    pub c_plus: f64,
    /// Earliest time included in the late window.
    pub t_from: f64,
    /// The two bounds have not closed up; the horizon is likely still transient.
    pub flagged: bool,
}

/// Bracket the spreading speed of a compact-data run from its late snapshots
/// (`t >= (1 - late_fraction) T`):
/// `c_minus` is the largest grid speed with `min_{|x| <= c t} u >= theta` at all of them,
/// `c_plus` the smallest with `max_{|x| >= c t} u < theta` at all of them.
pub fn spreading_interval(traj: &Trajectory, speeds: &[f64], theta: f64, late_fraction: f64) -> Result<SpreadingInterval> {
    if speeds.is_empty() {
        return Err(Error::InvalidParameter("empty speed grid".into()));
    }
    let t_end = traj.last().t;
    let t_from = (1.0 - late_fraction.clamp(0.0, 1.0)) * t_end;
    let late: Vec<&State> = traj.states.iter().filter(|s| s.t >= t_from - 1e-9 && s.t > 0.0).collect();
    if late.is_empty() {
        return Err(Error::InsufficientData("no late snapshots".into()));
    }
    let g = *traj.grid();
    let reach = g.half_length().min(g.right()).min(-g.left()) - default_buffer(&traj.params);

    let mut sorted = speeds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let inner_ok = |c: f64| {
        late.iter().all(|s| {
            let r = c * s.t;
            g.nodes().zip(s.u.values()).filter(|(x, _)| x.abs() <= r).all(|(_, &u)| u >= theta)
        })
    };
    let outer_ok = |c: f64| {
        late.iter().all(|s| {
            let r = c * s.t;
            g.nodes().zip(s.u.values()).filter(|(x, _)| x.abs() >= r).all(|(_, &u)| u < theta)
        })
    };
    let c_minus = sorted
        .iter()
        .copied()
        .filter(|&c| c * t_end <= reach && inner_ok(c))
        .fold(None, |_, c| Some(c))
        .ok_or_else(|| Error::InsufficientData(format!("no speed keeps u >= {theta} behind it: population did not spread")))?;
    let c_plus = sorted.iter().copied().find(|&c| c * t_end <= reach && outer_ok(c));
    let (c_plus, missing) = match c_plus {
        Some(c) => (c, false),
        None => (f64::INFINITY, true),
    };
    let flagged = missing || c_plus - c_minus > 0.05 * c_minus.max(1e-12);
    if flagged {
        log::warn!("spreading interval [{c_minus}, {c_plus}] not closed at t = {t_end}");
    }
    Ok(SpreadingInterval { c_minus, c_plus, t_from, flagged })
}

/// `max_{|x| <= c t} |u - a/b|` for the snapshot nearest `at` (final by default); needs `c < 2 sqrt(a)`.
pub fn behind_front_deviation(traj: &Trajectory, c: f64, p: &ModelParams, at: Option<f64>) -> Result<f64> {
    if !(c >= 0.0 && c < 2.0 * p.sqrt_a()) {
        return Err(Error::Hypothesis(format!("behind-front deviation needs 0 <= c < 2 sqrt(a) = {}", 2.0 * p.sqrt_a())));
    }
    let s = match at {
        Some(t) => traj.at(t),
        None => traj.last(),
    };
    let cap = p.carrying_capacity();
    let r = c * s.t;
    let g = s.grid();
    Ok(g.nodes().zip(s.u.values()).filter(|(x, _)| x.abs() <= r).fold(0.0, |m, (_, &u)| m.max((u - cap).abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeRatio {
    pub max_deviation: f64,
    pub window: (f64, f64),
    pub n: usize,
    pub t: f64,
}

/// `max |u / e^{-kappa (x - c_kappa t)} - 1|` over `x >= (c_kappa + eps) t` where the
/// reference exponential is still at least `1e-8`.
pub fn shape_ratio_ahead(state: &State, kappa: f64, p: &ModelParams, eps: f64, buffer: f64) -> Result<ShapeRatio> {
    let k_max = p.sqrt_a().min(p.sqrt_lambda());
    if !(kappa > 0.0 && kappa < k_max) {
        return Err(Error::Hypothesis(format!("shape convergence needs 0 < kappa < min(sqrt a, sqrt lambda) = {k_max}")));
    }
    if !(p.b > 2.0 * p.chi_mu()) {
        return Err(Error::Hypothesis(format!("shape convergence needs b > 2 chi mu (b = {}, chi mu = {})", p.b, p.chi_mu())));
    }
    let ck = p.c_kappa(kappa);
    let g = state.grid();
    let x_lo = (ck + eps) * state.t;
    let x_hi = (ck * state.t - (1e-8f64).ln() / kappa).min(g.right() - buffer);
    let mut worst = 0.0_f64;
    let mut n = 0;
    for (x, &u) in g.nodes().zip(state.u.values()) {
        if x >= x_lo && x <= x_hi {
            let reference = (-kappa * (x - ck * state.t)).exp();
            worst = worst.max((u / reference - 1.0).abs());
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("empty shape window [{x_lo}, {x_hi}]")));
    }
    Ok(ShapeRatio { max_deviation: worst, window: (x_lo, x_hi), n, t: state.t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub kappa_hat: f64,
    pub x_range: (f64, f64),
    /// Largest absolute residual of the log-linear fit.
    pub goodness: f64,
    pub n: usize,
}

/// Log-linear fit of the right tail over nodes with `u_lo <= u <= u_hi`, at least
/// `buffer` away from either end.
pub fn fit_decay(field: &ScalarField, u_lo: f64, u_hi: f64, buffer: f64) -> Result<DecayFit> {
    if !(u_lo > 0.0 && u_hi > u_lo) {
        return Err(Error::InvalidParameter(format!("need 0 < u_lo < u_hi, got [{u_lo}, {u_hi}]")));
    }
    let g = field.grid();
    let range = g.interior(buffer);
    let pts: Vec<(f64, f64)> =
        range.map(|i| (g.x(i), field[i])).filter(|&(_, u)| u >= u_lo && u <= u_hi).map(|(x, u)| (x, u.ln())).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!("{} nodes with u in [{u_lo}, {u_hi}], need 10", pts.len())));
    }
    let (slope, _, _, goodness) = least_squares(&pts);
    if !(slope < 0.0) || slope.abs() < 1e-12 {
        return Err(Error::InsufficientData(format!("field does not decay over the fit range (slope {slope})")));
    }
    Ok(DecayFit { kappa_hat: -slope, x_range: (pts[0].0, pts[pts.len() - 1].0), goodness, n: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(g: Grid, times: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<(f64, ScalarField)> {
        times.iter().map(|&t| (t, ScalarField::from_fn(g, |x| f(t, x)))).collect()
    }

    fn trace(fields: &[(f64, ScalarField)], theta: f64, buffer: f64) -> FrontTrace {
        FrontTrace::from_fields(fields.iter().map(|(t, f)| (*t, f)), theta, buffer)
    }

    #[test]
    fn linear_profile_is_tracked_exactly() {
        let g = Grid::new(50.0, 1000).unwrap();
        let c = 1.3;
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let fields = synthetic(g, &times, |t, x| (1.0 - (x - c * t)).max(0.0));
        let tr = trace(&fields, 0.5, 5.0);
        for s in &tr.samples {
            assert!((s.right - (c * s.t + 0.5)).abs() < 1e-12);
            assert!(s.left_clipped);
        }
        let est = estimate_speed(&tr, Side::Right, Some((0.0, 19.0))).unwrap();
        assert!((est.c_hat - c).abs() < 1e-12);
        assert!(est.stderr < 1e-12);
    }

    #[test]
    fn full_level_set_is_clipped_to_buffer() {
        let g = Grid::new(20.0, 200).unwrap();
        let fields = synthetic(g, &[0.0, 1.0], |_, _| 1.0);
        let tr = trace(&fields, 0.5, 3.0);
        let s = tr.samples[0];
        assert!(s.left_clipped && s.right_clipped);
        assert_eq!((s.left, s.right), (-17.0, 17.0));
        assert!(estimate_speed(&tr, Side::Right, None).is_err());
    }

    #[test]
    fn empty_level_set_is_omitted() {
        let g = Grid::new(20.0, 200).unwrap();
        let fields = synthetic(g, &[0.0, 1.0], |t, _| 0.3 * t);
        let tr = trace(&fields, 0.5, 3.0);
        assert_eq!(tr.omitted, vec![0.0, 1.0]);
        assert!(tr.samples.is_empty());
    }

    #[test]
    fn translating_exponential_has_slope_c_kappa() {
        let g = Grid::new(100.0, 4000).unwrap();
        let (kappa, a) = (0.5, 1.0);
        let ck = crate::theory::c_kappa(a, kappa);
        let times: Vec<f64> = (0..30).map(|k| 0.5 * k as f64).collect();
        let fields = synthetic(g, &times, |t, x| (-kappa * (x - ck * t)).exp().min(1.0));
        let est = estimate_speed(&trace(&fields, 0.5, 5.0), Side::Right, Some((0.0, 15.0))).unwrap();
        assert!((est.c_hat - ck).abs() < 1e-9);
    }

    #[test]
    fn noisy_positions_converge_to_true_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = 2.0;
        let mk = |n: usize, rng: &mut ChaCha8Rng| FrontTrace {
            theta: 0.5,
            buffer: 0.0,
            samples: (0..n)
                .map(|k| {
                    let t = k as f64 * 0.1;
                    let x = c * t + 0.3 * (rng.gen::<f64>() - 0.5);
                    FrontSample { t, left: -x, right: x, left_clipped: false, right_clipped: false }
                })
                .collect(),
            omitted: vec![],
        };
        let short = estimate_speed(&mk(20, &mut rng), Side::Right, Some((0.0, 2.0))).unwrap();
        let long = estimate_speed(&mk(2000, &mut rng), Side::Right, Some((0.0, 200.0))).unwrap();
        assert!((long.c_hat - c).abs() < (short.c_hat - c).abs().max(1e-3));
        assert!((long.c_hat - c).abs() < 1e-3);
        assert!(long.stderr < short.stderr);
    }

    #[test]
    fn translation_and_reflection() {
        let g = Grid::new(80.0, 1600).unwrap();
        let times: Vec<f64> = (0..25).map(|k| k as f64).collect();
        let prof = |t: f64, x: f64| 1.0 / (1.0 + ((x.abs() - 1.7 * t - 3.0) * 1.5).exp());
        let base = trace(&synthetic(g, &times, prof), 0.5, 5.0);
        // Shift by a whole number of cells.
        let dx = 20.0 * g.h();
        let shifted = trace(&synthetic(g, &times, |t, x| prof(t, x - dx)), 0.5, 5.0);
        for (a, b) in base.samples.iter().zip(&shifted.samples) {
            assert!((b.right - a.right - dx).abs() < 1e-9);
            assert!((b.left - a.left - dx).abs() < 1e-9);
        }
        let v0 = estimate_speed(&base, Side::Right, None).unwrap().c_hat;
        let v1 = estimate_speed(&shifted, Side::Right, None).unwrap().c_hat;
        assert!((v0 - v1).abs() < 1e-9);
        // Mirror an asymmetric profile: sides swap and speeds flip sign.
        let asym = |t: f64, x: f64| prof(t, x - 2.0 - 0.4 * t);
        let fwd = trace(&synthetic(g, &times, asym), 0.5, 5.0);
        let mir = trace(&synthetic(g, &times, |t, x| asym(t, -x)), 0.5, 5.0);
        for (a, b) in fwd.samples.iter().zip(&mir.samples) {
            assert!((a.right + b.left).abs() < 1e-9);
            assert!((a.left + b.right).abs() < 1e-9);
        }
        let r = estimate_speed(&fwd, Side::Right, None).unwrap().c_hat;
        let l = estimate_speed(&mir, Side::Left, None).unwrap().c_hat;
        assert!((r + l).abs() < 1e-9);
    }

    #[test]
    fn decay_fit_recovers_rate() {
        let g = Grid::new(60.0, 1200).unwrap();
        let pure = ScalarField::from_fn(g, |x| (-0.5 * x).exp());
        let fit = fit_decay(&pure, 1e-10, 1e-2, 1.0).unwrap();
        assert!((fit.kappa_hat - 0.5).abs() < 1e-10);

        let kappa = 0.4;
        let mixed = ScalarField::from_fn(g, |x| (-kappa * x).exp() + 0.01 * (-2.0 * kappa * x).exp());
        let shallow = fit_decay(&mixed, 1e-3, 0.5, 1.0).unwrap();
        let deep = fit_decay(&mixed, 1e-9, 1e-5, 1.0).unwrap();
        assert!((deep.kappa_hat - kappa).abs() < (shallow.kappa_hat - kappa).abs());
        assert!((deep.kappa_hat - kappa).abs() < 1e-6);

        let flat = ScalarField::constant(g, 0.3);
        assert!(fit_decay(&flat, 0.1, 0.5, 1.0).is_err());
        assert!(fit_decay(&flat, 0.5, 0.9, 1.0).is_err());
    }

    #[test]
    fn shape_ratio_is_zero_on_exact_ansatz() {
        let p = ModelParams::new(0.3, 1.0, 1.0, 1.0, 1.0).unwrap();
        let g = Grid::new(100.0, 2000).unwrap();
        let t = 10.0;
        let kappa = 0.5;
        let u = ScalarField::from_fn(g, |x| (-kappa * (x - p.c_kappa(kappa) * t)).exp());
        let s = State::new(t, u, &p, crate::kernel::TailPolicy::Zero);
        let r = shape_ratio_ahead(&s, kappa, &p, 0.2, 10.0).unwrap();
        assert!(r.max_deviation < 1e-12);
        assert!(r.n > 0);
        assert!(shape_ratio_ahead(&s, 1.0, &p, 0.2, 10.0).is_err());
        let strong = ModelParams::new(0.6, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(shape_ratio_ahead(&s, kappa, &strong, 0.2, 10.0).is_err());
    }
}
