//! Screened-Poisson kernel: `v = Psi(.; u)` solves `0 = v_xx - lambda v + mu u` on the line,
//!
//! ```text
//! Psi(x) = mu / (2 sqrt(lambda)) * integral of exp(-sqrt(lambda) |x - y|) u(y) dy
//! ```
//!
//! `u` is taken piecewise linear between nodes and integrated against the
//! exponential exactly on each cell. Outside the grid `u` is extended by a
//! [`TailPolicy`] whose contribution is also integrated in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::theory::ModelParams;

/// How `u` continues beyond the ends of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    /// `u = 0` outside; compactly supported data.
    Zero,
    /// `u = u(left end)` to the left, zero to the right; front-like data.
    ConstantLeft,
    /// `u` constant beyond both ends.
    ConstantBoth,
}

/// One-sided integrals at the grid ends contributed by the extension of `u`:
/// `left = int_{-inf}^{x_0} e^{-s (x_0 - y)} u dy`, `right = int_{x_N}^{inf} e^{-s (y - x_N)} u dy`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryIntegrals {
    pub left: f64,
    pub right: f64,
}

impl TailPolicy {
    pub fn boundary_integrals(self, u: &ScalarField, sqrt_lambda: f64) -> BoundaryIntegrals {
        let vals = u.values();
        let last = vals[vals.len() - 1];
        match self {
            TailPolicy::Zero => BoundaryIntegrals::default(),
            TailPolicy::ConstantLeft => BoundaryIntegrals { left: vals[0] / sqrt_lambda, right: 0.0 },
            TailPolicy::ConstantBoth => BoundaryIntegrals { left: vals[0] / sqrt_lambda, right: last / sqrt_lambda },
        }
    }
}

/// `1 - e^{-q} (1 + q)`, accurate for small `q`.
fn one_minus_exp_poly(q: f64) -> f64 {
    if q < 0.1 {
        // sum_{k>=2} (-1)^k (k-1) q^k / k!
        let mut term = q; // q^k / k! at k = 1
        let mut sum = 0.0;
        for k in 2..30 {
            term *= q / k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (k - 1) as f64 * term;
            if term < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - (-q).exp() * (1.0 + q)
    }
}

/// Weights of the exact cell integral `int_0^h e^{-s w} (u_far w/h + u_near (1 - w/h)) dw`
/// = `u_far * far + u_near * near`.
#[derive(Debug, Clone, Copy)]
struct CellWeights {
    decay: f64,
    far: f64,
    near: f64,
}

impl CellWeights {
    fn new(sqrt_lambda: f64, h: f64) -> Self {
        let q = sqrt_lambda * h;
        let e0 = -(-q).exp_m1() / sqrt_lambda;
        let e1 = one_minus_exp_poly(q) / (sqrt_lambda * sqrt_lambda * h);
        CellWeights { decay: (-q).exp(), far: e1, near: e0 - e1 }
    }
}

fn warn_if_negative(u: &ScalarField) {
    if let Some((i, v)) = u.undershoot(0.0) {
        log::warn!("kernel input negative ({v:e} at node {i}); positivity bounds do not apply");
    }
}

/// `(Psi, Psi_x)` in O(N) by two recursive sweeps with the tails of `tail`.
pub fn psi_fast(u: &ScalarField, p: &ModelParams, tail: TailPolicy) -> (ScalarField, ScalarField) {
    let bi = tail.boundary_integrals(u, p.sqrt_lambda());
    psi_fast_with_tails(u, p, bi)
}

/// As [`psi_fast`] with explicitly supplied boundary integrals.
pub fn psi_fast_with_tails(u: &ScalarField, p: &ModelParams, tails: BoundaryIntegrals) -> (ScalarField, ScalarField) {
    warn_if_negative(u);
    let grid = *u.grid();
    let s = p.sqrt_lambda();
    let w = CellWeights::new(s, grid.h());
    let vals = u.values();
    let n = vals.len();

    // from_left[i] = int_{-inf}^{x_i} e^{-s (x_i - y)} u(y) dy
    let mut from_left = vec![0.0; n];
    from_left[0] = tails.left;
    for i in 1..n {
        from_left[i] = w.decay * from_left[i - 1] + w.far * vals[i - 1] + w.near * vals[i];
    }
    // from_right[i] = int_{x_i}^{inf} e^{-s (y - x_i)} u(y) dy
    let mut from_right = vec![0.0; n];
    from_right[n - 1] = tails.right;
    for i in (0..n - 1).rev() {
        from_right[i] = w.decay * from_right[i + 1] + w.far * vals[i + 1] + w.near * vals[i];
    }

    let c_psi = p.mu / (2.0 * s);
    let c_dx = 0.5 * p.mu;
    let psi = from_left.iter().zip(&from_right).map(|(l, r)| c_psi * (l + r)).collect();
    let psi_x = from_left.iter().zip(&from_right).map(|(l, r)| c_dx * (r - l)).collect();
    (ScalarField::new(grid, psi).expect("length preserved"), ScalarField::new(grid, psi_x).expect("length preserved"))
}

/// One-sided integrals at every node, summed cell by cell from closed-form antiderivatives.
fn direct_one_sided(u: &ScalarField, s: f64, tails: BoundaryIntegrals) -> (Vec<f64>, Vec<f64>) {
    let grid = u.grid();
    let h = grid.h();
    let vals = u.values();
    let n = vals.len();
    // int_{d_near}^{d_far} e^{-s d} u(d) dy with u linear in the distance d.
    let cell = |d_near: f64, u_near: f64, u_far: f64| {
        let slope = (u_far - u_near) / h;
        let d_far = d_near + h;
        (-s * d_near).exp() * (u_near / s + slope / (s * s)) - (-s * d_far).exp() * (u_far / s + slope / (s * s))
    };
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    for j in 0..n {
        let mut acc = tails.left * (-s * j as f64 * h).exp();
        for i in 1..=j {
            acc += cell((j - i) as f64 * h, vals[i], vals[i - 1]);
        }
        left[j] = acc;
        let mut acc = tails.right * (-s * (n - 1 - j) as f64 * h).exp();
        for i in j..n - 1 {
            acc += cell((i - j) as f64 * h, vals[i], vals[i + 1]);
        }
        right[j] = acc;
    }
    (left, right)
}

/// `Psi` by O(N^2) direct summation; the reference for [`psi_fast`].
pub fn psi_direct(u: &ScalarField, p: &ModelParams, tail: TailPolicy) -> ScalarField {
    psi_direct_with_tails(u, p, tail.boundary_integrals(u, p.sqrt_lambda()))
}

pub fn psi_direct_with_tails(u: &ScalarField, p: &ModelParams, tails: BoundaryIntegrals) -> ScalarField {
    warn_if_negative(u);
    let s = p.sqrt_lambda();
    let (l, r) = direct_one_sided(u, s, tails);
    let c = p.mu / (2.0 * s);
    ScalarField::new(*u.grid(), l.iter().zip(&r).map(|(a, b)| c * (a + b)).collect()).expect("length preserved")
}

/// `Psi_x` by O(N^2) direct summation.
pub fn psi_x_direct(u: &ScalarField, p: &ModelParams, tail: TailPolicy) -> ScalarField {
    let s = p.sqrt_lambda();
    let (l, r) = direct_one_sided(u, s, tail.boundary_integrals(u, s));
    ScalarField::new(*u.grid(), l.iter().zip(&r).map(|(a, b)| 0.5 * p.mu * (b - a)).collect()).expect("length preserved")
}

/// Max over interior nodes of `|(psi_{i+1} - 2 psi_i + psi_{i-1}) / h^2 - lambda psi_i + mu u_i|`.
pub fn elliptic_residual(u: &ScalarField, psi: &ScalarField, p: &ModelParams) -> Result<f64> {
    u.ensure_same_grid(psi)?;
    let h2 = u.grid().h().powi(2);
    let (uv, pv) = (u.values(), psi.values());
    Ok((1..uv.len() - 1).map(|i| ((pv[i + 1] - 2.0 * pv[i] + pv[i - 1]) / h2 - p.lambda * pv[i] + p.mu * uv[i]).abs()).fold(0.0, f64::max))
}

/// Pointwise worst value of `(|Psi_x| - sqrt(lambda) Psi) / max(Psi)` over `range`;
/// nonpositive when the gradient law holds.
pub fn gradient_law_excess(psi: &ScalarField, psi_x: &ScalarField, p: &ModelParams, range: std::ops::Range<usize>) -> f64 {
    let s = p.sqrt_lambda();
    let scale = psi.max_abs().max(f64::MIN_POSITIVE);
    range.map(|i| (psi_x[i].abs() - s * psi[i]) / scale).fold(f64::NEG_INFINITY, f64::max)
}

/// Upper bounds on `Psi` and `|Psi_x|` at `x` valid for every `0 <= u <= e^{-k x} + d e^{-kt x}`,
/// `k, kt < sqrt(lambda)`.
pub fn two_mode_psi_bounds(p: &ModelParams, kappa: f64, kappa_t: f64, d: f64, x: f64) -> Result<(f64, f64)> {
    let s = p.sqrt_lambda();
    if !(kappa > 0.0 && kappa < s && kappa_t > 0.0 && kappa_t < s) {
        return Err(Error::Hypothesis(format!("two-mode kernel bounds need 0 < kappa, kappa_tilde < sqrt(lambda) = {s}")));
    }
    let (g1, g2) = (p.lambda - kappa * kappa, p.lambda - kappa_t * kappa_t);
    let (e1, e2) = ((-kappa * x).exp(), (-kappa_t * x).exp());
    let psi = p.mu / g1 * e1 + d * p.mu / g2 * e2;
    let dpsi = p.mu * (1.0 / g1.sqrt() + kappa / g1) * e1 + d * p.mu * (1.0 / g2.sqrt() + kappa_t / g2) * e2;
    Ok((psi, dpsi))
}

/// `chi kappa Psi_x - chi lambda Psi - (b - chi mu) M e^{-kappa x}`; nonpositive for
/// `0 <= u <= M e^{-kappa x}` with `kappa` admissible.
pub fn drift_excess(p: &ModelParams, kappa: f64, m: f64, x: f64, psi: f64, psi_x: f64) -> f64 {
    p.chi * kappa * psi_x - p.chi * p.lambda * psi - (p.b - p.chi_mu()) * m * (-kappa * x).exp()
}
