//! Physical wave profile `U(ξ)` from the phase-plane solution.
//!
//! The inverse `x(U) = x0 - ∫_0^U d(r)^{1/(p-1)} y(r)^{-1/p} dr` is computed
//! on a Chebyshev grid in `U`. Within `δ` of `±1` the integrand is a
//! negative power of the distance to the endpoint; there `y` is replaced by
//! a power law `K s^m` matched at `s = δ` and the tail is integrated after a
//! change of variables that removes the singularity.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::interp::{hermite, hermite_deriv, locate, MonotoneCubic};
use crate::problem::{AsymptoticExponents, ProblemSpec};
use crate::quadrature::{integrate, integrate_with_breaks, QuadOptions};
use crate::shooter::Trajectory;
use crate::speed::{CStarResult, SCHEMA_VERSION};

pub const DEFAULT_SAMPLES: usize = 2048;
pub const DEFAULT_STITCH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interface {
    Finite,
    Infinite,
    Undetermined,
}

impl Interface {
    pub fn label(&self) -> &'static str {
        match self {
            Interface::Finite => "Finite",
            Interface::Infinite => "Infinite",
            Interface::Undetermined => "Undetermined",
        }
    }
}

/// The exponent comparison made for one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub gamma: f64,
    pub gamma_err: f64,
    pub p_minus_1: f64,
}

/// Finite/infinite interfaces: `left` is `x1` (where `U = +1`, governed by
/// `γ⁺`), `right` is `x_minus1` (where `U = -1`, governed by `γ⁻`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceClass {
    pub left: Interface,
    pub right: Interface,
    pub left_criterion: Option<Criterion>,
    pub right_criterion: Option<Criterion>,
}

impl InterfaceClass {
    pub fn unknown() -> Self {
        Self {
            left: Interface::Undetermined,
            right: Interface::Undetermined,
            left_criterion: None,
            right_criterion: None,
        }
    }
}

fn classify_side(gamma: f64, gamma_err: f64, p: f64) -> Interface {
    let pm1 = p - 1.0;
    // An estimated exponent too close to the threshold cannot decide.
    if gamma_err > 0.0 && (gamma - pm1).abs() <= 3.0 * gamma_err {
        return Interface::Undetermined;
    }
    if gamma >= pm1 {
        Interface::Infinite
    } else if p <= 2.0 {
        Interface::Finite
    } else {
        Interface::Undetermined
    }
}

/// Applies the `γ` versus `p - 1` rule on each side.
pub fn classify_interfaces(exponents: &AsymptoticExponents, p: f64) -> InterfaceClass {
    InterfaceClass {
        left: classify_side(exponents.gamma_plus, exponents.gamma_plus_err, p),
        right: classify_side(exponents.gamma_minus, exponents.gamma_minus_err, p),
        left_criterion: Some(Criterion {
            gamma: exponents.gamma_plus,
            gamma_err: exponents.gamma_plus_err,
            p_minus_1: p - 1.0,
        }),
        right_criterion: Some(Criterion {
            gamma: exponents.gamma_minus,
            gamma_err: exponents.gamma_minus_err,
            p_minus_1: p - 1.0,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `U → -1`
    Minus,
    /// `U → +1`
    Plus,
}

impl Side {
    fn end(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }

    /// Point at distance `s` from the endpoint.
    fn at(self, s: f64) -> f64 {
        match self {
            Side::Minus => -1.0 + s,
            Side::Plus => 1.0 - s,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Side::Minus => "U -> -1",
            Side::Plus => "U -> +1",
        }
    }
}

/// Power law `y ≈ K s^m` next to an endpoint and the resulting integrand
/// `d^{1/(p-1)} K^{-1/p} s^{-q}`, `q = m/p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub m: f64,
    pub k: f64,
    pub q: f64,
    pub delta: f64,
    /// `∫` of the model over `(0, δ)`; `None` when it diverges (`q ≥ 1`).
    pub integral: Option<f64>,
    pub error: f64,
    /// `x` at the outermost knot and its distance from the endpoint, for
    /// extrapolating beyond the knots.
    x_edge: f64,
    s_edge: f64,
    d_end: f64,
    side: Side,
}

impl TailModel {
    pub fn is_finite(&self) -> bool {
        self.integral.is_some()
    }

    /// Distance `s(ξ)` to the endpoint beyond the outermost knot.
    fn invert(&self, xi: f64) -> f64 {
        let a = self.d_end * self.k.powf(-1.0 / self.p());
        let dx = match self.side {
            Side::Minus => xi - self.x_edge,
            Side::Plus => self.x_edge - xi,
        };
        if (self.q - 1.0).abs() < 1e-12 {
            self.s_edge * (-dx / a).exp()
        } else {
            let base = self.s_edge.powf(1.0 - self.q) - (1.0 - self.q) * dx / a;
            if base <= 0.0 {
                0.0
            } else {
                base.powf(1.0 / (1.0 - self.q))
            }
        }
    }

    fn p(&self) -> f64 {
        self.m / self.q
    }
}

/// Reconstruction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    pub x0: f64,
    pub samples: usize,
    /// Distance from `±1` below which the power-law tail is used.
    pub stitch: f64,
    /// Fixed `ξ` window for the uniform samples; by default it spans the
    /// interfaces (or the outermost knots on infinite sides).
    pub xi_range: Option<(f64, f64)>,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            x0: 0.0,
            samples: DEFAULT_SAMPLES,
            stitch: DEFAULT_STITCH,
            xi_range: None,
        }
    }
}

/// Sampled wave `(ξ, U, U')` with interface data.
#[derive(Clone)]
pub struct WaveProfile {
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub x0: f64,
    /// `-∞` when the `U = +1` side has no finite interface.
    pub x1: f64,
    /// `+∞` when the `U = -1` side has no finite interface.
    pub x_minus1: f64,
    pub x1_error: f64,
    pub x_minus1_error: f64,
    pub c_star: f64,
    pub classes: InterfaceClass,
    pub left_tail: TailModel,
    pub right_tail: TailModel,
    p: f64,
    // x(U) at the knots, increasing in x
    knot_x: Vec<f64>,
    knot_u: Vec<f64>,
    knot_du: Vec<f64>,
    phase: Trajectory,
    diffusion: crate::problem::ScalarFn,
}

impl std::fmt::Debug for WaveProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveProfile")
            .field("samples", &self.xi.len())
            .field("c_star", &self.c_star)
            .field("x0", &self.x0)
            .field("x1", &self.x1)
            .field("x_minus1", &self.x_minus1)
            .field("classes", &self.classes)
            .finish_non_exhaustive()
    }
}

impl WaveProfile {
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `y(U)` of the phase-plane solution behind this profile.
    pub fn phase(&self) -> &Trajectory {
        &self.phase
    }

    /// `U' = -(y^{1/p'}/d)^{1/(p-1)}` at level `u`.
    pub fn slope_at(&self, u: f64) -> f64 {
        slope(self.p, self.phase.eval(u).max(0.0), (self.diffusion)(u))
    }

    /// Number of interpolation knots.
    pub fn knots(&self) -> usize {
        self.knot_x.len()
    }

    /// Writes `xi,u,du` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["xi", "u", "du"])?;
        for j in 0..self.xi.len() {
            wr.write_record([
                format!("{:.16e}", self.xi[j]),
                format!("{:.16e}", self.u[j]),
                format!("{:.16e}", self.du[j]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// JSON sidecar; infinite interfaces are written as `"-inf"` / `"+inf"`.
    pub fn sidecar(&self) -> serde_json::Value {
        let loc = |x: f64| {
            if x == f64::NEG_INFINITY {
                json!("-inf")
            } else if x == f64::INFINITY {
                json!("+inf")
            } else {
                json!(x)
            }
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "c_star": self.c_star,
            "x0": self.x0,
            "x1": loc(self.x1),
            "x_minus1": loc(self.x_minus1),
            "x1_error": self.x1_error,
            "x_minus1_error": self.x_minus1_error,
            "left_class": self.classes.left.label(),
            "right_class": self.classes.right.label(),
        })
    }
}

fn slope(p: f64, y: f64, d: f64) -> f64 {
    let pc = p / (p - 1.0);
    -(y.powf(1.0 / pc) / d).powf(1.0 / (p - 1.0))
}

/// Profile with `x(0) = x0` and `n` uniform samples.
pub fn reconstruct(spec: &ProblemSpec, result: &CStarResult, x0: f64, n: usize) -> Result<WaveProfile> {
    reconstruct_with(
        spec,
        result,
        &ReconstructOptions {
            x0,
            samples: n,
            ..Default::default()
        },
    )
}

pub fn reconstruct_with(
    spec: &ProblemSpec,
    result: &CStarResult,
    opts: &ReconstructOptions,
) -> Result<WaveProfile> {
    let n = opts.samples;
    if n < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 samples, got {n}")));
    }
    let delta = opts.stitch;
    if !(delta > 0.0 && delta < 0.1) {
        return Err(Error::InvalidParameter(format!("stitch distance {delta} outside (0, 0.1)")));
    }
    let traj = &result.profile;
    if traj.end() < 1.0 {
        return Err(Error::ProfileNotPositive {
            at: traj.end(),
            value: 0.0,
        });
    }
    let p = spec.p();
    let inv_p = 1.0 / p;
    let dpow = 1.0 / (p - 1.0);
    let y = |r: f64| traj.eval(r);
    let phi = |r: f64| spec.d(r).powf(dpow) * y(r).powf(-inv_p);

    // Knots: Chebyshev points in U, plus 0 and the two stitch points.
    let mut knots: Vec<f64> = (1..n - 1)
        .map(|i| -(PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    knots.extend([0.0, -1.0 + delta, 1.0 - delta]);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    for &u in &knots {
        let v = y(u);
        if !(v > 0.0) {
            return Err(Error::ProfileNotPositive { at: u, value: v });
        }
    }

    let classes = spec
        .exponents()
        .map(|e| classify_interfaces(e, p))
        .unwrap_or_else(InterfaceClass::unknown);

    // Core knots by panel quadrature outward from U = 0.
    let zero = knots.iter().position(|&u| u == 0.0).unwrap();
    let mut xs = vec![f64::NAN; knots.len()];
    xs[zero] = opts.x0;
    let quad = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_panels: 4000,
    };
    let panel = |a: f64, b: f64| -> Result<f64> {
        let lo = traj.nodes.partition_point(|&r| r <= a);
        let hi = traj.nodes.partition_point(|&r| r < b);
        let breaks = &traj.nodes[lo..hi.max(lo)];
        Ok(integrate_with_breaks(phi, a, b, breaks, quad)?.value)
    };
    for i in zero + 1..knots.len() {
        if knots[i] > 1.0 - delta {
            break;
        }
        xs[i] = xs[i - 1] - panel(knots[i - 1], knots[i])?;
    }
    for i in (0..zero).rev() {
        if knots[i] < -1.0 + delta {
            break;
        }
        xs[i] = xs[i + 1] + panel(knots[i], knots[i + 1])?;
    }

    // Tails.
    let exps = spec.exponents();
    let c = result.c_star;
    let crit = 1.0 / (p - 1.0);
    let exponent = |side: Side| -> f64 {
        match (side, exps) {
            (Side::Minus, Some(e)) => {
                if c == 0.0 || e.gamma_minus <= crit {
                    1.0 + e.gamma_minus
                } else {
                    e.gamma_minus * p
                }
            }
            (Side::Plus, Some(e)) => {
                if c == 0.0 || e.gamma_plus <= crit {
                    1.0 + e.gamma_plus
                } else {
                    p / (p - 1.0)
                }
            }
            (side, None) => {
                let (a, b) = (y(side.at(delta)), y(side.at(delta / 8.0)));
                (a / b).ln() / 8f64.ln()
            }
        }
    };

    let mut tails = Vec::with_capacity(2);
    for side in [Side::Minus, Side::Plus] {
        let m = exponent(side);
        let q = m * inv_p;
        let k = y(side.at(delta)) / delta.powf(m);
        let k_half = y(side.at(delta / 2.0)) / (delta / 2.0).powf(m);
        let class = match side {
            Side::Minus => classes.right,
            Side::Plus => classes.left,
        };
        let d_end = spec.d(side.end()).powf(dpow);
        let (integral, error) = if q < 1.0 {
            let full = |kk: f64| -> Result<(f64, f64)> {
                let e = 1.0 / (1.0 - q);
                let r = integrate(
                    |t: f64| spec.d(side.at(t.powf(e))).powf(dpow),
                    0.0,
                    delta.powf(1.0 - q),
                    quad,
                )?;
                let scale = kk.powf(-inv_p) * e;
                Ok((r.value * scale, r.error * scale))
            };
            let (v, qerr) = full(k)?;
            let (v_half, _) = full(k_half)?;
            (Some(v), qerr + (v - v_half).abs())
        } else {
            if class == Interface::Finite {
                return Err(Error::SingularQuadratureFailure { side: side.name() });
            }
            (None, 0.0)
        };
        if q < 1.0 && class == Interface::Infinite {
            log::warn!(
                "{}: power law y ~ s^{m:.4} gives a finite interface although the exponent rule says infinite",
                side.name()
            );
        }
        tails.push(TailModel {
            m,
            k,
            q,
            delta,
            integral,
            error,
            x_edge: f64::NAN,
            s_edge: f64::NAN,
            d_end,
            side,
        });
    }
    let (mut minus_tail, mut plus_tail) = (tails[0], tails[1]);

    // Tail knots from the power law, integrated in log distance.
    let x_stitch_minus = xs[knots.iter().position(|&u| u >= -1.0 + delta).unwrap()];
    let x_stitch_plus = xs[knots.iter().rposition(|&u| u <= 1.0 - delta).unwrap()];
    let tail_offset = |t: &TailModel, s: f64| -> Result<f64> {
        let kp = t.k.powf(-inv_p);
        let r = integrate(
            |v: f64| {
                let ss = v.exp();
                spec.d(t.side.at(ss)).powf(dpow) * kp * (v * (1.0 - t.q)).exp()
            },
            s.ln(),
            delta.ln(),
            quad,
        )?;
        Ok(r.value)
    };
    for i in 0..knots.len() {
        if knots[i] < -1.0 + delta {
            xs[i] = x_stitch_minus + tail_offset(&minus_tail, knots[i] + 1.0)?;
        } else if knots[i] > 1.0 - delta {
            xs[i] = x_stitch_plus - tail_offset(&plus_tail, 1.0 - knots[i])?;
        }
    }
    minus_tail.x_edge = xs[0];
    minus_tail.s_edge = knots[0] + 1.0;
    let last = knots.len() - 1;
    plus_tail.x_edge = xs[last];
    plus_tail.s_edge = 1.0 - knots[last];

    let x_minus1 = minus_tail
        .integral
        .map_or(f64::INFINITY, |v| x_stitch_minus + v);
    let x1 = plus_tail
        .integral
        .map_or(f64::NEG_INFINITY, |v| x_stitch_plus - v);

    // Knots ordered by increasing x (decreasing U).
    let knot_x: Vec<f64> = xs.iter().rev().copied().collect();
    let knot_u: Vec<f64> = knots.iter().rev().copied().collect();
    if knot_x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonConvergent("x(U) is not strictly monotone on the knots".into()));
    }
    let knot_du: Vec<f64> = knot_u
        .iter()
        .map(|&u| slope(p, y(u), spec.d(u)))
        .collect();

    let mut profile = WaveProfile {
        xi: Vec::new(),
        u: Vec::new(),
        du: Vec::new(),
        x0: opts.x0,
        x1,
        x_minus1,
        x1_error: plus_tail.error,
        x_minus1_error: minus_tail.error,
        c_star: result.c_star,
        classes,
        left_tail: plus_tail,
        right_tail: minus_tail,
        p,
        knot_x,
        knot_u,
        knot_du,
        phase: traj.clone(),
        diffusion: spec.diffusion_handle(),
    };
    let interp = MonotoneCubic::with_slopes(
        profile.knot_x.clone(),
        profile.knot_u.clone(),
        profile.knot_du.clone(),
    );
    // keep the limited slopes
    profile.knot_du = (0..profile.knot_x.len())
        .map(|i| interp.deriv(profile.knot_x[i]))
        .collect();

    // Infinite sides stop at the outermost knot, but no further than
    // CORE_SPANS core widths past |U| = 0.9 (algebraic tails reach far out).
    let core_lo = interp_x(&profile, CORE_LEVEL);
    let core_hi = interp_x(&profile, -CORE_LEVEL);
    let reach = CORE_SPANS * (core_hi - core_lo);
    let (a, b) = opts.xi_range.unwrap_or((
        if x1.is_finite() { x1 } else { profile.knot_x[0].max(core_lo - reach) },
        if x_minus1.is_finite() {
            x_minus1
        } else {
            profile.knot_x.last().unwrap().min(core_hi + reach)
        },
    ));
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("empty xi window [{a}, {b}]")));
    }
    let h = (b - a) / (n - 1) as f64;
    profile.xi = (0..n).map(|j| if j == n - 1 { b } else { a + h * j as f64 }).collect();
    let (u, du): (Vec<f64>, Vec<f64>) = profile.xi.iter().map(|&x| evaluate(&profile, x)).unzip();
    profile.u = u;
    profile.du = du;
    Ok(profile)
}

const CORE_LEVEL: f64 = 0.9;
const CORE_SPANS: f64 = 20.0;

// ξ with U(ξ) = u on the knot table (U decreases along the knots).
fn interp_x(profile: &WaveProfile, u: f64) -> f64 {
    let us = &profile.knot_u;
    let i = us.iter().position(|&v| v <= u).unwrap_or(us.len() - 1).max(1);
    let (u0, u1) = (us[i - 1], us[i]);
    let (x0, x1) = (profile.knot_x[i - 1], profile.knot_x[i]);
    x0 + (x1 - x0) * (u - u0) / (u1 - u0)
}

/// `(U(ξ), U'(ξ))`; `(±1, 0)` beyond finite interfaces.
pub fn evaluate(profile: &WaveProfile, xi: f64) -> (f64, f64) {
    if xi <= profile.x1 {
        return (1.0, 0.0);
    }
    if xi >= profile.x_minus1 {
        return (-1.0, 0.0);
    }
    let xs = &profile.knot_x;
    let n = xs.len();
    let u = if xi < xs[0] {
        1.0 - profile.left_tail.invert(xi)
    } else if xi > xs[n - 1] {
        -1.0 + profile.right_tail.invert(xi)
    } else {
        let i = locate(xs, xi);
        hermite(
            xs[i],
            xs[i + 1],
            profile.knot_u[i],
            profile.knot_u[i + 1],
            profile.knot_du[i],
            profile.knot_du[i + 1],
            xi,
        )
    };
    let u = u.clamp(-1.0, 1.0);
    if u.abs() >= 1.0 {
        return (u, 0.0);
    }
    (u, profile.slope_at(u))
}

/// Derivative of the interpolant itself (not the phase-plane formula).
pub fn interpolant_slope(profile: &WaveProfile, xi: f64) -> f64 {
    let xs = &profile.knot_x;
    if xi <= xs[0] || xi >= xs[xs.len() - 1] {
        return 0.0;
    }
    let i = locate(xs, xi);
    hermite_deriv(
        xs[i],
        xs[i + 1],
        profile.knot_u[i],
        profile.knot_u[i + 1],
        profile.knot_du[i],
        profile.knot_du[i + 1],
        xi,
    )
}

/// `∫_0^{±(1-s)} d^{1/(p-1)} y^{-1/p}` with the computed `y` (no tail model),
/// for checking divergence as `s → 0`.
pub fn partial_integral(spec: &ProblemSpec, traj: &Trajectory, side: Side, s: f64) -> Result<f64> {
    let p = spec.p();
    let dpow = 1.0 / (p - 1.0);
    let phi = |r: f64| spec.d(r).powf(dpow) * traj.eval(r).max(f64::MIN_POSITIVE).powf(-1.0 / p);
    let b = side.at(s);
    let (lo, hi) = if b > 0.0 { (0.0, b) } else { (b, 0.0) };
    let i0 = traj.nodes.partition_point(|&r| r <= lo);
    let i1 = traj.nodes.partition_point(|&r| r < hi);
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_panels: 20_000,
    };
    Ok(integrate_with_breaks(phi, lo, hi, &traj.nodes[i0..i1.max(i0)], opts)?.value)
}

/// Centered finite-difference residual of
/// `(d(U)|U'|^{p-2}U')' + c U' - f(U)` at the uniform samples with `ξ` in
/// `window`, using only the sampled `u`.
pub fn fd_residual(spec: &ProblemSpec, profile: &WaveProfile, u: &[f64], window: (f64, f64)) -> f64 {
    fd_residual_on(spec, profile.c_star, &profile.xi, u, window)
}

/// [`fd_residual`] on an arbitrary uniform grid `xi`.
pub fn fd_residual_on(spec: &ProblemSpec, c: f64, xi: &[f64], u: &[f64], window: (f64, f64)) -> f64 {
    let n = xi.len();
    let h = (xi[n - 1] - xi[0]) / (n - 1) as f64;
    let p = spec.p();
    let flux = |ua: f64, ub: f64| {
        let g = (ub - ua) / h;
        spec.d(0.5 * (ua + ub)) * g.abs().powf(p - 2.0) * g
    };
    let mut worst = 0.0f64;
    for j in 1..n - 1 {
        if xi[j] < window.0 || xi[j] > window.1 {
            continue;
        }
        let div = (flux(u[j], u[j + 1]) - flux(u[j - 1], u[j])) / h;
        let du = (u[j + 1] - u[j - 1]) / (2.0 * h);
        let r = div + c * du - spec.f(u[j]);
        worst = worst.max(r.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BuiltinFamily, Diffusion, ExponentSource};
    use crate::speed::solve_cstar;

    fn ex(g: f64) -> AsymptoticExponents {
        AsymptoticExponents::symmetric(g, 1.0, ExponentSource::UserSupplied).unwrap()
    }

    #[test]
    fn classification_table() {
        use Interface::*;
        for (p, g, want) in [
            (2.0, 0.5, Finite),
            (2.0, 1.0, Infinite),
            (3.0, 1.0, Undetermined),
            (1.5, 0.4, Finite),
            (1.5, 0.6, Infinite),
            (3.0, 2.5, Infinite),
        ] {
            let c = classify_interfaces(&ex(g), p);
            assert_eq!((c.left, c.right), (want, want), "p = {p}, gamma = {g}");
        }
    }

    #[test]
    fn uncertain_estimate_is_undetermined() {
        let mut e = ex(1.01);
        e.gamma_plus_err = 0.01;
        let c = classify_interfaces(&e, 2.0);
        assert_eq!(c.left, Interface::Undetermined);
        assert_eq!(c.right, Interface::Infinite);
    }

    fn cubic_profile(n: usize) -> (ProblemSpec, WaveProfile) {
        let spec =
            ProblemSpec::from_family(BuiltinFamily::CubicBistable { s0: 0.3 }, 2.0, Diffusion::default())
                .unwrap();
        let r = solve_cstar(&spec, 1e-10, 1e-10).unwrap();
        let w = reconstruct(&spec, &r, 0.0, n).unwrap();
        (spec, w)
    }

    #[test]
    fn cubic_matches_tanh() {
        let (_, w) = cubic_profile(512);
        assert_eq!(w.x1, f64::NEG_INFINITY);
        assert_eq!(w.x_minus1, f64::INFINITY);
        for (x, u) in w.xi.iter().zip(&w.u) {
            assert!((u + (x / 2f64.sqrt()).tanh()).abs() < 1e-6, "xi = {x}");
        }
        let (u0, du0) = evaluate(&w, 0.0);
        assert!(u0.abs() < 1e-12);
        assert!((du0 + 1.0 / 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn evaluate_extrapolates_tails() {
        let (_, w) = cubic_profile(64);
        for x in [-40.0, 40.0] {
            let (u, du) = evaluate(&w, x);
            let exact = -(x / 2f64.sqrt()).tanh();
            assert!((u - exact).abs() < 1e-9, "{x}: {u} vs {exact}");
            assert!(du <= 0.0);
        }
    }

    #[test]
    fn shift_equivariance() {
        let spec =
            ProblemSpec::from_family(BuiltinFamily::CubicBistable { s0: 0.45 }, 2.0, Diffusion::default())
                .unwrap();
        let r = solve_cstar(&spec, 1e-10, 1e-10).unwrap();
        let a = reconstruct(&spec, &r, 0.0, 128).unwrap();
        let b = reconstruct(&spec, &r, 2.5, 128).unwrap();
        for j in 0..a.xi.len() {
            assert!((a.xi[j] + 2.5 - b.xi[j]).abs() < 1e-12);
            assert!((a.u[j] - b.u[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_interfaces_for_sharp_double_well() {
        let spec = ProblemSpec::from_family(
            BuiltinFamily::DoubleWellAlpha { alpha: 1.5 },
            2.0,
            Diffusion::default(),
        )
        .unwrap();
        let r = solve_cstar(&spec, 1e-10, 1e-10).unwrap();
        let w = reconstruct(&spec, &r, 0.0, 256).unwrap();
        assert!(w.x1.is_finite() && w.x_minus1.is_finite());
        assert!(w.x1 < 0.0 && w.x_minus1 > 0.0);
        assert_eq!(evaluate(&w, w.x1 - 1.0), (1.0, 0.0));
        assert_eq!(evaluate(&w, w.x_minus1 + 1.0), (-1.0, 0.0));
        assert!(w.u.windows(2).all(|p| p[1] <= p[0]));
        assert!(w.du.iter().all(|&d| d <= 0.0));
    }

    #[test]
    fn sidecar_writes_infinities_as_strings() {
        let (_, w) = cubic_profile(32);
        let v = w.sidecar();
        assert_eq!(v["x1"], "-inf");
        assert_eq!(v["x_minus1"], "+inf");
        assert_eq!(v["left_class"], "Infinite");
    }

    #[test]
    fn too_few_samples() {
        let spec =
            ProblemSpec::from_family(BuiltinFamily::CubicBistable { s0: 0.3 }, 2.0, Diffusion::default())
                .unwrap();
        let r = solve_cstar(&spec, 1e-8, 1e-10).unwrap();
        assert!(matches!(reconstruct(&spec, &r, 0.0, 8), Err(Error::InvalidParameter(_))));
    }
}
