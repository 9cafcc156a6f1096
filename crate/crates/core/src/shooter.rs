//! Forward shooting for `y' = p' (c (y⁺)^{1/p} + g(r))`, `y(-1) = 0`.
//!
//! The initial point is degenerate (`y^{1/p}` is not Lipschitz at zero), so
//! the integration starts a short distance `ε` inside the interval from a
//! power-law seed and continues with a Dormand-Prince 5(4) pair. Where `y`
//! is small and `c < 0` the equation turns stiff (`∂f/∂y ~ y^{1/p-1}`), and
//! steps there use extrapolated backward Euler instead. A shot
//! stops as soon as `y` drops below zero past `s0`: for `c ≤ 0` the
//! solution can then never recover.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::interp::{hermite, locate};
use crate::problem::ProblemSpec;

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Differences between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const CROSSING_TOL: f64 = 1e-10;
/// Steps with `h |∂f/∂y|` above this use the implicit scheme instead of the
/// explicit pair, whose real stability interval ends near 3.3.
const STIFF_SWITCH: f64 = 3.0;
/// A landing point (`s0` or `1`) closer than this when the controller gives
/// up is reached with one implicit Euler step.
const FINISH_SPAN: f64 = 1e-10;

/// Integrator settings for one shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Distance from `-1` at which the seed is placed.
    pub eps_start: f64,
    /// `|y(1)|` at or below this counts as hitting zero; `y` below `-threshold`
    /// past `s0` counts as a crossing.
    pub threshold: f64,
    /// How many times a crossing before `s0` triggers a rerun at a tenfold
    /// tighter tolerance.
    pub retries: u32,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self::from_tol(1e-10)
    }
}

impl ShootOptions {
    /// Relative tolerance `tol` with an absolute floor of `1e-10 · tol`.
    ///
    /// Error control is essentially relative: near `c*` the terminal value
    /// can grow only like `(c - c*)^2`, so an absolute floor at the usual
    /// `1e-12` would hide which side of `c*` a shot lies on. Perturbations
    /// decay toward `r = 1`, so relative control stays cheap there.
    pub fn from_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 1e-10,
            h_min: 1e-13,
            h_max: 1e-2,
            eps_start: 1e-6,
            threshold: tol * 1e-10,
            retries: 1,
        }
    }

    fn tightened(&self) -> Self {
        Self {
            rtol: self.rtol * 0.1,
            atol: self.atol * 0.1,
            threshold: self.threshold * 0.1,
            retries: self.retries.saturating_sub(1),
            ..*self
        }
    }
}

/// How a shot ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotOutcome {
    /// `y` reached zero at `r0 ≥ s0` before `r = 1`.
    Undershoot { r0: f64 },
    /// `y(1)` is positive beyond the threshold.
    Overshoot { y1: f64 },
    /// `|y(1)|` is within the threshold.
    Converged { y1: f64 },
}

impl ShotOutcome {
    /// The side of `c*` the shot lies on: `true` for speeds at or above it.
    pub fn is_overshoot_side(&self) -> bool {
        match *self {
            ShotOutcome::Overshoot { .. } => true,
            ShotOutcome::Converged { y1 } => y1 > 0.0,
            ShotOutcome::Undershoot { .. } => false,
        }
    }

    pub fn terminal(&self) -> TerminalValue {
        match *self {
            ShotOutcome::Undershoot { r0 } => TerminalValue::Crossed(r0),
            ShotOutcome::Overshoot { y1 } | ShotOutcome::Converged { y1 } => TerminalValue::Value(y1),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ShotOutcome::Undershoot { .. } => "undershoot",
            ShotOutcome::Overshoot { .. } => "overshoot",
            ShotOutcome::Converged { .. } => "converged",
        }
    }
}

/// `y_c(1)`, or the point where the shot crossed zero. Crossings order below
/// all values, and an earlier crossing below a later one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalValue {
    Crossed(f64),
    Value(f64),
}

impl TerminalValue {
    /// `self ≤ other` with `slack` added to `other` when both are values.
    pub fn le_with_slack(&self, other: &TerminalValue, slack: f64) -> bool {
        match (*self, *other) {
            (TerminalValue::Value(a), TerminalValue::Value(b)) => a <= b + slack,
            (TerminalValue::Crossed(_), TerminalValue::Value(_)) => true,
            (TerminalValue::Value(a), TerminalValue::Crossed(_)) => a <= slack,
            (TerminalValue::Crossed(a), TerminalValue::Crossed(b)) => a <= b + slack,
        }
    }
}

impl PartialOrd for TerminalValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (TerminalValue::Crossed(a), TerminalValue::Crossed(b))
            | (TerminalValue::Value(a), TerminalValue::Value(b)) => a.partial_cmp(b),
            (TerminalValue::Crossed(_), TerminalValue::Value(_)) => Some(Ordering::Less),
            (TerminalValue::Value(_), TerminalValue::Crossed(_)) => Some(Ordering::Greater),
        }
    }
}

/// One discretized shot `y_c` with its Hermite dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub c: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// `y'` at each node.
    pub slopes: Vec<f64>,
    pub outcome: ShotOutcome,
    pub tolerance: f64,
    pub rejected_steps: usize,
    /// Power law used by [`Trajectory::eval`] on the start segment.
    pub head: Option<PowerHead>,
}

/// Startup values tabulated on a geometric grid of `s = 1 + r`, interpolated
/// linearly in log-log coordinates (piecewise power law).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerHead {
    ln_s: Vec<f64>,
    ln_y: Vec<f64>,
}

impl PowerHead {
    fn new(s: &[f64], y: &[f64]) -> Option<Self> {
        let (ln_s, ln_y): (Vec<f64>, Vec<f64>) = s
            .iter()
            .zip(y)
            .filter(|(_, &y)| y > 0.0 && y.is_finite())
            .map(|(s, y)| (s.ln(), y.ln()))
            .unzip();
        (ln_s.len() >= 2).then_some(Self { ln_s, ln_y })
    }

    /// Largest tabulated distance.
    pub fn s_max(&self) -> f64 {
        self.ln_s.last().unwrap().exp()
    }

    pub fn eval(&self, s: f64) -> f64 {
        let x = s.ln();
        let i = locate(&self.ln_s, x);
        let t = (x - self.ln_s[i]) / (self.ln_s[i + 1] - self.ln_s[i]);
        (self.ln_y[i] + t * (self.ln_y[i + 1] - self.ln_y[i])).exp()
    }
}

impl Trajectory {
    /// Wraps precomputed samples (used for the stationary branch).
    pub fn from_samples(
        c: f64,
        nodes: Vec<f64>,
        values: Vec<f64>,
        slopes: Vec<f64>,
        outcome: ShotOutcome,
        tolerance: f64,
    ) -> Self {
        assert!(nodes.len() >= 2 && nodes.len() == values.len() && nodes.len() == slopes.len());
        Self {
            c,
            nodes,
            values,
            slopes,
            outcome,
            tolerance,
            rejected_steps: 0,
            head: None,
        }
    }

    /// Last node: `1` unless the shot crossed zero earlier.
    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn terminal(&self) -> TerminalValue {
        self.outcome.terminal()
    }

    /// Dense output; beyond the last node the last value is returned.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.end() {
            return *self.values.last().unwrap();
        }
        if r <= self.nodes[0] {
            return self.values[0];
        }
        if let Some(h) = &self.head {
            let s = 1.0 + r;
            if s < h.s_max() {
                return h.eval(s);
            }
        }
        let i = locate(&self.nodes, r);
        hermite(
            self.nodes[i],
            self.nodes[i + 1],
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            r,
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Writes `r,y` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "y"])?;
        for (r, y) in self.nodes.iter().zip(&self.values) {
            wr.write_record([format!("{r:.17e}"), format!("{y:.17e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Shoots with relative tolerance `tol` (see [`ShootOptions::from_tol`]).
pub fn shoot(spec: &ProblemSpec, c: f64, tol: f64) -> Result<Trajectory> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    shoot_with(spec, c, &ShootOptions::from_tol(tol))
}

/// `y_c(1)` or the crossing point.
pub fn terminal_value(spec: &ProblemSpec, c: f64, tol: f64) -> Result<TerminalValue> {
    Ok(shoot(spec, c, tol)?.terminal())
}

pub fn shoot_with(spec: &ProblemSpec, c: f64, opts: &ShootOptions) -> Result<Trajectory> {
    if !(c <= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "shots need a finite c <= 0, got {c}"
        )));
    }
    match integrate(spec, c, opts) {
        Err(Error::SpuriousCrossing { at, .. }) if opts.retries > 0 => {
            log::debug!("c = {c}: crossing at r = {at} before s0, retrying at tighter tolerance");
            shoot_with(spec, c, &opts.tightened())
        }
        other => other,
    }
}

/// Startup value of `y` at distance `s` from `-1`.
pub fn startup_seed(spec: &ProblemSpec, c: f64, s: f64) -> Result<f64> {
    Ok(startup_profile(spec, c, &[0.5 * s, s])?[1])
}

/// Startup values of `y` at the increasing distances `s` (at least two) from
/// `-1`, following the dominant balance of the equation next to `-1`.
pub fn startup_profile(spec: &ProblemSpec, c: f64, s: &[f64]) -> Result<Vec<f64>> {
    assert!(s.len() >= 2, "need at least two startup distances");
    let p = spec.p();
    let crit = 1.0 / (p - 1.0);
    match spec.exponents() {
        Some(e) if c < 0.0 && (e.gamma_minus - crit).abs() <= 1e-12 * crit.max(1.0) => {
            // y ~ κ s^{1+γ} with κ(1+γ) = p'(c κ^{1/p} + γ0)
            let kappa = balance_coefficient(p, c, e.gamma_minus, e.gamma0_minus);
            Ok(s.iter().map(|&s| kappa * s.powf(1.0 + e.gamma_minus)).collect())
        }
        Some(e) if c < 0.0 && e.gamma_minus > crit => {
            // c y^{1/p} balances g; one correction step along the slow manifold
            let lead = (e.gamma0_minus / c.abs()).powf(p);
            Ok(s.iter()
                .map(|&s| slow_manifold(spec, c, s).unwrap_or(lead * s.powf(e.gamma_minus * p)))
                .collect())
        }
        _ => potential_seed(spec, c, s),
    }
}

// p' G with one Picard correction for the drift term; the integral of
// (p' G)^{1/p} uses the local power of G between consecutive distances.
fn potential_seed(spec: &ProblemSpec, c: f64, s: &[f64]) -> Result<Vec<f64>> {
    let p = spec.p();
    let pc = spec.p_conj();
    let grid: Vec<f64> = std::iter::once(-1.0).chain(s.iter().map(|&s| -1.0 + s)).collect();
    let big = spec.potential_on_grid(&grid)?;
    let big = &big[1..];
    let power = |k: usize| {
        let (a, b) = if k == 0 { (0, 1) } else { (k - 1, k) };
        (big[b] / big[a]).ln() / (s[b] / s[a]).ln()
    };
    Ok((0..s.len())
        .map(|k| {
            let base = pc * big[k];
            let m = power(k);
            if c == 0.0 || base <= 0.0 || !(m > 0.0 && m.is_finite()) {
                return base;
            }
            let corrected = base + pc * c * base.powf(1.0 / p) * s[k] / (m / p + 1.0);
            if corrected > 0.5 * base {
                corrected
            } else {
                base
            }
        })
        .collect())
}

// Quasi-steady value of y when the reaction is balanced by the drift term:
// c y^{1/p} + g = y' / p', solved once with y' from the leading balance.
fn slow_manifold(spec: &ProblemSpec, c: f64, s: f64) -> Option<f64> {
    let p = spec.p();
    let pc = spec.p_conj();
    let lead = |s: f64| {
        let g = spec.g(-1.0 + s);
        (g > 0.0).then(|| (g / c.abs()).powf(p))
    };
    let h = 1e-4 * s;
    let y0 = lead(s)?;
    let dy0 = (lead(s + h)? - lead(s - h)?) / (2.0 * h);
    let corrected = spec.g(-1.0 + s) - dy0 / pc;
    let y = if corrected > 0.0 {
        (corrected / c.abs()).powf(p)
    } else {
        y0
    };
    (y > 0.0 && y.is_finite()).then_some(y)
}

// Stiff regime near -1: the relaxation rate towards the slow manifold
// grows faster than 1/s, so an explicit scheme starts where J s is moderate.
const STIFF_START: f64 = 1e3;
// Smallest distance from -1 tabulated in the startup head.
const HEAD_FLOOR: f64 = 1e-14;

fn start_distance(spec: &ProblemSpec, c: f64, eps: f64) -> f64 {
    let e = match spec.exponents() {
        Some(e) if c < 0.0 => e,
        _ => return eps,
    };
    let p = spec.p();
    let crit = 1.0 / (p - 1.0);
    if e.gamma_minus <= crit * (1.0 + 1e-12) {
        return eps;
    }
    let cap = (0.05f64).min(0.25 * (1.0 + spec.s0())).max(eps);
    let stiffness = |s: f64| match slow_manifold(spec, c, s) {
        Some(y) => spec.p_conj() * c.abs() / p * y.powf(1.0 / p - 1.0) * s,
        None => 0.0,
    };
    let mut s = eps;
    while s < cap && stiffness(s) > STIFF_START {
        s = (2.0 * s).min(cap);
    }
    s
}

/// Positive root of `κ(1+γ) = p'(c κ^{1/p} + γ0)` for `c < 0`.
pub fn balance_coefficient(p: f64, c: f64, gamma: f64, gamma0: f64) -> f64 {
    let pc = p / (p - 1.0);
    let h = |k: f64| k * (1.0 + gamma) - pc * (c * k.powf(1.0 / p) + gamma0);
    // h(0) < 0 and h is increasing for c ≤ 0
    let mut hi = pc * gamma0 / (1.0 + gamma);
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn integrate(spec: &ProblemSpec, c: f64, opts: &ShootOptions) -> Result<Trajectory> {
    let rhs = phase_rhs(spec, c);

    let eps = start_distance(spec, c, opts.eps_start);
    let r_start = -1.0 + eps;
    let mut dist = vec![eps];
    while dist.last().unwrap() * 0.5 >= HEAD_FLOOR {
        dist.push(dist.last().unwrap() * 0.5);
    }
    dist.reverse();
    let start = startup_profile(spec, c, &dist)?;
    let seed = *start.last().unwrap();
    if !(seed > 0.0 && seed.is_finite()) {
        return Err(Error::NonPositiveStart { at: r_start, seed });
    }

    let head = PowerHead::new(&dist, &start);
    let nodes = vec![-1.0, r_start];
    let values = vec![0.0, seed];
    let slopes = vec![rhs(-1.0, 0.0), rhs(r_start, seed)];
    let h = (0.1 * eps).max(opts.eps_start).min(opts.h_max);
    march(spec, c, opts, nodes, values, slopes, h, head)
}

/// Forward solve of the phase-plane equation from an interior point
/// `(r_start, y_start)` with `y_start > 0`, classified like a shot.
pub fn shoot_from(spec: &ProblemSpec, c: f64, r_start: f64, y_start: f64, tol: f64) -> Result<Trajectory> {
    if !(r_start > -1.0 && r_start < 1.0) {
        return Err(Error::InvalidParameter(format!("start {r_start} outside (-1, 1)")));
    }
    if !(y_start > 0.0 && y_start.is_finite()) {
        return Err(Error::NonPositiveStart { at: r_start, seed: y_start });
    }
    if !(c <= 0.0 && c.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("need c <= 0 and tol > 0, got {c}, {tol}")));
    }
    let opts = ShootOptions::from_tol(tol);
    let k = phase_rhs(spec, c)(r_start, y_start);
    let h = (1e-3 * (1.0 - r_start)).min(opts.h_max);
    march(spec, c, &opts, vec![r_start], vec![y_start], vec![k], h, None)
}

fn phase_rhs(spec: &ProblemSpec, c: f64) -> impl Fn(f64, f64) -> f64 + '_ {
    let pc = spec.p_conj();
    let inv_p = 1.0 / spec.p();
    move |r: f64, y: f64| pc * (c * y.max(0.0).powf(inv_p) + spec.g(r))
}

#[allow(clippy::too_many_arguments)]
fn march(
    spec: &ProblemSpec,
    c: f64,
    opts: &ShootOptions,
    mut nodes: Vec<f64>,
    mut values: Vec<f64>,
    mut slopes: Vec<f64>,
    mut h: f64,
    head: Option<PowerHead>,
) -> Result<Trajectory> {
    let s0 = spec.s0();
    let rhs = phase_rhs(spec, c);
    let mut rejected = 0usize;
    let mut r = *nodes.last().expect("start node");
    let mut y = *values.last().expect("start value");
    let mut k1 = *slopes.last().expect("start slope");
    let mut finish = false;

    loop {
        if let Some(r0) = imminent_crossing(spec, c, r, y, k1) {
            return Ok(crossed(c, opts, nodes, values, slopes, rhs(r0, 0.0), r0, rejected, head));
        }

        // Land exactly on s0 and on 1 so the kink in g sits on a node.
        let target = if r < s0 { s0 } else { 1.0 };
        let mut last = false;
        if r + h >= target - 1e-15 {
            h = target - r;
            last = true;
        }
        if h < opts.h_min && !last && !finish {
            return Err(Error::StepSizeCollapse { at: r, h });
        }

        let r_new = if last { target } else { r + h };
        let stiff = stiffness(spec, c, y) * h > STIFF_SWITCH;
        let (y_new, k7, err, order) = if finish {
            // remaining distance below the resolvable step size
            let y_new = implicit_euler(spec, c, r_new, y, h);
            (y_new, rhs(r_new, y_new), 0.0, 1.0)
        } else if stiff {
            let full = implicit_euler(spec, c, r_new, y, h);
            let mid = implicit_euler(spec, c, r + 0.5 * h, y, 0.5 * h);
            let half = implicit_euler(spec, c, r_new, mid, 0.5 * h);
            let y_new = 2.0 * half - full;
            let scale = opts.atol + opts.rtol * y.abs().max(y_new.abs());
            (y_new, rhs(r_new, y_new), ((half - full) / scale).abs(), 2.0)
        } else {
            let k2 = rhs(r + C2 * h, y + h * A21 * k1);
            let k3 = rhs(r + C3 * h, y + h * (A31 * k1 + A32 * k2));
            let k4 = rhs(r + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = rhs(r + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            let k6 = rhs(r + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
            let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let k7 = rhs(r_new, y_new);
            let err_est = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let scale = opts.atol + opts.rtol * y.abs().max(y_new.abs());
            (y_new, k7, (err_est / scale).abs(), 5.0)
        };

        if !(err <= 1.0) || !y_new.is_finite() {
            rejected += 1;
            let factor = if err.is_finite() {
                (SAFETY * err.powf(-1.0 / order)).clamp(MIN_FACTOR, 1.0)
            } else {
                MIN_FACTOR
            };
            h *= factor;
            if h < opts.h_min {
                if target - r <= FINISH_SPAN {
                    finish = true;
                    h = target - r;
                    continue;
                }
                return Err(Error::StepSizeCollapse { at: r, h });
            }
            continue;
        }

        if y_new < -opts.threshold {
            if r_new <= s0 {
                if y_new < -100.0 * opts.atol {
                    return Err(Error::SpuriousCrossing { at: r_new, s0 });
                }
            } else {
                let r0 = locate_crossing(r, r_new, y, y_new, k1, k7).max(s0);
                return Ok(crossed(c, opts, nodes, values, slopes, rhs(r0, 0.0), r0, rejected, head));
            }
        }

        nodes.push(r_new);
        values.push(y_new);
        slopes.push(k7);
        r = r_new;
        y = y_new;
        k1 = k7;
        finish = false;

        if r >= 1.0 {
            let outcome = if y > opts.threshold {
                ShotOutcome::Overshoot { y1: y }
            } else {
                ShotOutcome::Converged { y1: y }
            };
            return Ok(Trajectory {
                c,
                nodes,
                values,
                slopes,
                outcome,
                tolerance: opts.rtol,
                rejected_steps: rejected,
                head,
            });
        }

        let factor = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err.powf(-1.0 / order)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        h = (h * factor).min(opts.h_max);
    }
}

/// Ends a shot with a crossing at `r0`, dropping the last node if the
/// crossing sits on it.
#[allow(clippy::too_many_arguments)]
fn crossed(
    c: f64,
    opts: &ShootOptions,
    mut nodes: Vec<f64>,
    mut values: Vec<f64>,
    mut slopes: Vec<f64>,
    slope: f64,
    r0: f64,
    rejected: usize,
    head: Option<PowerHead>,
) -> Trajectory {
    if nodes.last().is_some_and(|&r| r0 <= r) {
        nodes.pop();
        values.pop();
        slopes.pop();
    }
    nodes.push(r0);
    values.push(0.0);
    slopes.push(slope);
    Trajectory {
        c,
        nodes,
        values,
        slopes,
        outcome: ShotOutcome::Undershoot { r0 },
        tolerance: opts.rtol,
        rejected_steps: rejected,
        head,
    }
}

/// Past `s0` every solution satisfies `y' <= p' g < 0`, so from `(r, y)` it
/// reaches zero within `y / (p'|g|)` as long as `g` barely changes over that
/// distance. When that distance is below the crossing tolerance the crossing
/// is reported directly; resolving it by steps would need `h` below `h_min`
/// because `y^{1/p}` is not smooth at zero.
fn imminent_crossing(spec: &ProblemSpec, c: f64, r: f64, y: f64, slope: f64) -> Option<f64> {
    if r <= spec.s0() || y <= 0.0 || slope >= 0.0 {
        return None;
    }
    let pc = spec.p_conj();
    let g = slope / pc - c * y.powf(1.0 / spec.p());
    if g >= 0.0 {
        return None;
    }
    let reach = y / (pc * g.abs());
    let room = 0.01 * (1.0 - r).min(r - spec.s0());
    (reach <= CROSSING_TOL && reach <= room).then(|| r + y / slope.abs())
}

/// `∂/∂y` of the right-hand side in absolute value, `p'|c| y^{1/p-1} / p`.
fn stiffness(spec: &ProblemSpec, c: f64, y: f64) -> f64 {
    if y <= 0.0 || c == 0.0 {
        return 0.0;
    }
    spec.p_conj() * c.abs() / spec.p() * y.powf(1.0 / spec.p() - 1.0)
}

/// One backward Euler step to `r_new` of size `h` from `y`. The implicit
/// equation `Y = y + h p' (c (Y⁺)^{1/p} + g(r_new))` is monotone in `Y`; for
/// positive `Y = w^p` it reads `w^p + β w = A` with `β = h p' |c|`, a convex
/// increasing function of `w` that Newton solves from the right.
fn implicit_euler(spec: &ProblemSpec, c: f64, r_new: f64, y: f64, h: f64) -> f64 {
    let p = spec.p();
    let a = y + h * spec.p_conj() * spec.g(r_new);
    if a <= 0.0 {
        return a;
    }
    let beta = h * spec.p_conj() * c.abs();
    let mut w = a.powf(1.0 / p);
    if beta > 0.0 {
        w = w.min(a / beta);
    }
    for _ in 0..100 {
        let wp = w.powf(p);
        let step = (wp + beta * w - a) / (p * wp / w + beta);
        let next = (w - step).max(0.5 * w);
        if (w - next).abs() <= 1e-15 * w {
            w = next;
            break;
        }
        w = next;
    }
    w.powf(p)
}

// Zero of the Hermite piece on [r0, r1], where y0 ≥ 0 > y1 is not
// guaranteed at the left end only when the previous step dipped slightly.
fn locate_crossing(r0: f64, r1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let f = |r: f64| hermite(r0, r1, y0, y1, d0, d1, r);
    if y0 <= 0.0 {
        return r0;
    }
    let (mut lo, mut hi) = (r0, r1);
    while hi - lo > CROSSING_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BuiltinFamily, Diffusion};

    fn cubic(s0: f64) -> ProblemSpec {
        ProblemSpec::from_family(BuiltinFamily::CubicBistable { s0 }, 2.0, Diffusion::default()).unwrap()
    }

    #[test]
    fn closed_form_cubic_converges() {
        let spec = cubic(0.3);
        let c = -(2f64).sqrt() * 0.3;
        let t = shoot(&spec, c, 1e-10).unwrap();
        assert!(matches!(t.terminal(), TerminalValue::Value(v) if v.abs() < 1e-8), "{:?}", t.outcome);
        for k in 0..=200 {
            let r = -1.0 + 0.01 * k as f64;
            let exact = (1.0 - r * r).powi(2) / 2.0;
            assert!((t.eval(r) - exact).abs() < 1e-8, "r = {r}: {} vs {exact}", t.eval(r));
        }
    }

    #[test]
    fn zero_speed_overshoots_by_potential() {
        let spec = cubic(0.3);
        let t = shoot(&spec, 0.0, 1e-10).unwrap();
        match t.outcome {
            ShotOutcome::Overshoot { y1 } => assert!((y1 - 0.8).abs() < 1e-8, "{y1}"),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn fast_shot_crosses_after_s0() {
        let spec = cubic(0.3);
        let coarse = shoot(&spec, -10.0, 1e-8).unwrap();
        let fine = shoot(&spec, -10.0, 1e-11).unwrap();
        let (ShotOutcome::Undershoot { r0: a }, ShotOutcome::Undershoot { r0: b }) =
            (coarse.outcome, fine.outcome)
        else {
            panic!("{:?} {:?}", coarse.outcome, fine.outcome)
        };
        assert!((0.3..1.0).contains(&a) && (0.3..1.0).contains(&b));
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn slower_than_cstar_undershoots() {
        let spec = cubic(0.3);
        assert!(matches!(terminal_value(&spec, -1.0, 1e-10).unwrap(), TerminalValue::Crossed(_)));
    }

    #[test]
    fn positive_speed_is_rejected() {
        assert!(matches!(shoot(&cubic(0.3), 0.1, 1e-10), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn balance_coefficient_for_cubic_is_two() {
        let c = -(2f64).sqrt() * 0.3;
        assert!((balance_coefficient(2.0, c, 1.0, 2.6) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_order() {
        use TerminalValue::*;
        assert!(Crossed(0.9) < Value(-1.0));
        assert!(Crossed(0.5) < Crossed(0.6));
        assert!(Value(0.1) < Value(0.2));
        assert!(Value(1e-12).le_with_slack(&Crossed(0.99), 1e-11));
    }

    #[test]
    fn nodes_increase_and_start_at_zero() {
        let t = shoot(&cubic(0.45), -0.3, 1e-9).unwrap();
        assert_eq!(t.nodes[0], -1.0);
        assert_eq!(t.values[0], 0.0);
        assert!(t.nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(t.nodes.iter().any(|&r| (r - t.nodes[t.nodes.len() - 1]).abs() < 1e-15));
    }

    #[test]
    fn csv_has_header() {
        let t = shoot(&cubic(0.3), -0.2, 1e-8).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,y\n"));
        assert_eq!(text.lines().count(), t.len() + 1);
    }
}
