//! Problem data `(p, d, f)` and the derived transformed reaction
//! `g = d^{1/(p-1)} f`, its potential `G(r) = ∫_{-1}^r g`, and the endpoint
//! power laws of `g`.
//!
//! Reaction and diffusion are pure function handles shared behind `Arc`, so
//! a [`ProblemSpec`] is immutable and can be used from many threads at once.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quadrature::{integrate_with_breaks, QuadOptions};

/// Scalar function handle. Must be pure.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of Chebyshev points used to validate the hypotheses on `d` and `g`.
pub const VALIDATION_POINTS: usize = 1024;
/// Magnitudes below this are treated as roundoff in the sign checks.
pub const ROUNDOFF: f64 = 1e-10;
const S0_TOL: f64 = 1e-12;

/// Default fitting neighbourhood for [`estimate_exponents`]: distances
/// `2^-6 .. 2^-20` from each endpoint.
pub const DEFAULT_FIT_WINDOW: f64 = 1.0 / 64.0;
pub const DEFAULT_FIT_SAMPLES: usize = 15;
pub const DEFAULT_FIT_THRESHOLD: f64 = 0.02;

/// Where a set of endpoint exponents came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentSource {
    UserSupplied,
    /// Closed form known for a builtin family.
    Analytic,
    Estimated,
}

/// Power laws `g(r) ~ γ0⁻ (1+r)^{γ⁻}` at `-1` and `g(r) ~ -γ0⁺ (1-r)^{γ⁺}` at `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticExponents {
    pub gamma_minus: f64,
    pub gamma0_minus: f64,
    pub gamma_plus: f64,
    pub gamma0_plus: f64,
    pub source: ExponentSource,
    /// Standard error of the fitted slopes (zero unless estimated).
    pub gamma_minus_err: f64,
    pub gamma_plus_err: f64,
    /// RMS log-residual of the fits (zero unless estimated).
    pub residual_minus: f64,
    pub residual_plus: f64,
}

impl AsymptoticExponents {
    pub fn new(
        gamma_minus: f64,
        gamma0_minus: f64,
        gamma_plus: f64,
        gamma0_plus: f64,
        source: ExponentSource,
    ) -> Result<Self> {
        let e = Self {
            gamma_minus,
            gamma0_minus,
            gamma_plus,
            gamma0_plus,
            source,
            gamma_minus_err: 0.0,
            gamma_plus_err: 0.0,
            residual_minus: 0.0,
            residual_plus: 0.0,
        };
        e.validate()?;
        Ok(e)
    }

    /// Same exponent and coefficient on both sides.
    pub fn symmetric(gamma: f64, gamma0: f64, source: ExponentSource) -> Result<Self> {
        Self::new(gamma, gamma0, gamma, gamma0, source)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_minus", self.gamma_minus),
            ("gamma0_minus", self.gamma0_minus),
            ("gamma_plus", self.gamma_plus),
            ("gamma0_plus", self.gamma0_plus),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Diffusion coefficients available from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusion {
    /// `d(s) = d0`
    Constant { d0: f64 },
    /// `d(s) = d0 + d2 s^2`
    Quadratic { d0: f64, d2: f64 },
}

impl Default for Diffusion {
    fn default() -> Self {
        Diffusion::Constant { d0: 1.0 }
    }
}

impl Diffusion {
    pub fn handle(&self) -> ScalarFn {
        match *self {
            Diffusion::Constant { d0 } => Arc::new(move |_| d0),
            Diffusion::Quadratic { d0, d2 } => Arc::new(move |s| d0 + d2 * s * s),
        }
    }
}

/// Reaction sampled from a table of `(s, g)` pairs covering `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedReaction {
    interp: MonotoneCubic,
}

impl TabulatedReaction {
    pub fn new(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() < 4 || s.len() != g.len() {
            return Err(Error::Table(format!(
                "need at least 4 matching samples, got {} abscissae and {} values",
                s.len(),
                g.len()
            )));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("abscissae must be strictly increasing".into()));
        }
        if (s[0] + 1.0).abs() > 1e-12 || (s[s.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::Table(format!(
                "table must span [-1, 1], got [{}, {}]",
                s[0],
                s[s.len() - 1]
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite reaction value".into()));
        }
        Ok(Self {
            interp: MonotoneCubic::new(s, g, true),
        })
    }

    /// Reads a CSV file with header `s,g`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().map(str::trim).collect();
        if cols != ["s", "g"] {
            return Err(Error::Table(format!(
                "expected header `s,g`, found `{}`",
                cols.join(",")
            )));
        }
        let mut s = Vec::new();
        let mut g = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = s.len() + 1;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .map(str::trim)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| Error::Table(format!("bad number in row {row}: {e}")))
            };
            let (sv, gv) = (parse(0)?, parse(1)?);
            s.push(sv);
            g.push(gv);
        }
        Self::new(s, g)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.interp.eval(s.clamp(-1.0, 1.0))
    }

    /// Smallest spacing of the table next to either endpoint.
    pub fn endpoint_resolution(&self) -> f64 {
        let xs = self.interp.xs();
        let n = xs.len();
        (xs[1] - xs[0]).min(xs[n - 1] - xs[n - 2])
    }
}

/// Parameters of a planted solution `y*(r) = κ (1+r)^a (1-r)^b` travelling
/// at speed `c`; the reaction is recovered from the phase-plane equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedParams {
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ManufacturedParams {
    pub fn y(&self, r: f64) -> f64 {
        if r <= -1.0 || r >= 1.0 {
            return 0.0;
        }
        self.kappa * (1.0 + r).powf(self.a) * (1.0 - r).powf(self.b)
    }

    pub fn dy(&self, r: f64) -> f64 {
        if r <= -1.0 || r >= 1.0 {
            return 0.0;
        }
        let (a, b) = (self.a, self.b);
        self.kappa
            * (a * (1.0 + r).powf(a - 1.0) * (1.0 - r).powf(b)
                - b * (1.0 + r).powf(a) * (1.0 - r).powf(b - 1.0))
    }

    /// `g(r) = y*'(r)/p' - c y*(r)^{1/p}`
    pub fn g(&self, r: f64, p: f64) -> f64 {
        let p_conj = p / (p - 1.0);
        self.dy(r) / p_conj - self.c * self.y(r).powf(1.0 / p)
    }

    /// Endpoint power laws of the manufactured `g`, from the two competing
    /// terms `y*'/p'` and `-c y*^{1/p}`.
    pub fn exponents(&self, p: f64) -> Result<AsymptoticExponents> {
        let p_conj = p / (p - 1.0);
        let side = |lead: f64, other: f64, deriv_coef: f64, root_coef: f64| -> (f64, f64) {
            // lead: exponent of the derivative term, other: of the root term
            if (lead - other).abs() < 1e-12 {
                (lead, deriv_coef + root_coef)
            } else if lead < other {
                (lead, deriv_coef)
            } else {
                (other, root_coef)
            }
        };
        let k = self.kappa;
        let (gm, g0m) = side(
            self.a - 1.0,
            self.a / p,
            k * self.a * 2f64.powf(self.b) / p_conj,
            -self.c * k.powf(1.0 / p) * 2f64.powf(self.b / p),
        );
        let (gp, g0p) = side(
            self.b - 1.0,
            self.b / p,
            k * self.b * 2f64.powf(self.a) / p_conj,
            self.c * k.powf(1.0 / p) * 2f64.powf(self.a / p),
        );
        AsymptoticExponents::new(gm, g0m, gp, g0p, ExponentSource::Analytic).map_err(|_| {
            Error::SignStructureViolation(format!(
                "manufactured reaction has the wrong sign next to an endpoint \
                 (gamma0- = {g0m:.4}, gamma0+ = {g0p:.4})"
            ))
        })
    }
}

/// Builtin reaction families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinFamily {
    /// `f(s) = |s²-1|^{α-2} (s²-1) s`, the derivative of the double well
    /// `|s²-1|^α / (2α)`.
    DoubleWellAlpha { alpha: f64 },
    /// `f(s) = (s²-1)(s-s0)`
    CubicBistable { s0: f64 },
    /// `f(s) = |1-s²|^{α-1} (s0-s)`; reduces to the cubic at `α = 2` and to
    /// the double well at `s0 = 0`.
    AlphaBistable { alpha: f64, s0: f64 },
    /// `g` given directly by a table; the diffusion is taken as `d ≡ 1`.
    Tabulated(TabulatedReaction),
    Manufactured(ManufacturedParams),
}

impl BuiltinFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinFamily::DoubleWellAlpha { .. } => "double_well",
            BuiltinFamily::CubicBistable { .. } => "cubic",
            BuiltinFamily::AlphaBistable { .. } => "alpha_bistable",
            BuiltinFamily::Tabulated(_) => "tabulated",
            BuiltinFamily::Manufactured(_) => "manufactured",
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            BuiltinFamily::DoubleWellAlpha { alpha } if !(*alpha > 1.0 && alpha.is_finite()) => {
                bad(format!("double-well alpha must exceed 1, got {alpha}"))
            }
            BuiltinFamily::CubicBistable { s0 } if !(*s0 > -1.0 && *s0 < 1.0) => {
                bad(format!("cubic s0 must lie in (-1, 1), got {s0}"))
            }
            BuiltinFamily::AlphaBistable { alpha, s0 }
                if !(*alpha > 1.0 && alpha.is_finite() && *s0 > -1.0 && *s0 < 1.0) =>
            {
                bad(format!("alpha-bistable needs alpha > 1 and s0 in (-1, 1), got ({alpha}, {s0})"))
            }
            BuiltinFamily::Manufactured(m)
                if !(m.kappa > 0.0 && m.a > 1.0 && m.b > 1.0 && m.c < 0.0) =>
            {
                bad(format!(
                    "manufactured problem needs kappa > 0, a, b > 1, c < 0; got {m:?}"
                ))
            }
            _ => Ok(()),
        }
    }

    /// The reaction `f` as a function handle (for `Tabulated` and
    /// `Manufactured` this is `g` itself, paired with `d ≡ 1`).
    pub fn reaction(&self, p: f64) -> ScalarFn {
        match self.clone() {
            BuiltinFamily::DoubleWellAlpha { alpha } => Arc::new(move |s| {
                let w = 1.0 - s * s;
                if w <= 0.0 {
                    0.0
                } else {
                    -w.powf(alpha - 1.0) * s
                }
            }),
            BuiltinFamily::CubicBistable { s0 } => Arc::new(move |s| (s * s - 1.0) * (s - s0)),
            BuiltinFamily::AlphaBistable { alpha, s0 } => Arc::new(move |s| {
                let w = 1.0 - s * s;
                if w <= 0.0 {
                    0.0
                } else {
                    w.powf(alpha - 1.0) * (s0 - s)
                }
            }),
            BuiltinFamily::Tabulated(t) => Arc::new(move |s| t.eval(s)),
            BuiltinFamily::Manufactured(m) => Arc::new(move |s| m.g(s, p)),
        }
    }

    /// Closed-form endpoint exponents of `g` for diffusion values `d_minus =
    /// d(-1)`, `d_plus = d(1)`. `None` for tabulated reactions.
    pub fn analytic_exponents(
        &self,
        p: f64,
        d_minus: f64,
        d_plus: f64,
    ) -> Option<Result<AsymptoticExponents>> {
        let q = 1.0 / (p - 1.0);
        let (sm, sp) = (d_minus.powf(q), d_plus.powf(q));
        let src = ExponentSource::Analytic;
        let e = match *self {
            BuiltinFamily::DoubleWellAlpha { alpha } => {
                let c = 2f64.powf(alpha - 1.0);
                AsymptoticExponents::new(alpha - 1.0, c * sm, alpha - 1.0, c * sp, src)
            }
            BuiltinFamily::CubicBistable { s0 } => {
                AsymptoticExponents::new(1.0, 2.0 * (1.0 + s0) * sm, 1.0, 2.0 * (1.0 - s0) * sp, src)
            }
            BuiltinFamily::AlphaBistable { alpha, s0 } => {
                let c = 2f64.powf(alpha - 1.0);
                AsymptoticExponents::new(
                    alpha - 1.0,
                    c * (1.0 + s0) * sm,
                    alpha - 1.0,
                    c * (1.0 - s0) * sp,
                    src,
                )
            }
            BuiltinFamily::Tabulated(_) => return None,
            BuiltinFamily::Manufactured(m) => m.exponents(p),
        };
        Some(e)
    }
}

/// The full input to every solve.
#[derive(Clone)]
pub struct ProblemSpec {
    p: f64,
    p_conj: f64,
    diffusion: ScalarFn,
    reaction: ScalarFn,
    s0: f64,
    g_sup: f64,
    exponents: Option<AsymptoticExponents>,
    family: Option<BuiltinFamily>,
    resolution: f64,
    quad: QuadOptions,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("p", &self.p)
            .field("s0", &self.s0)
            .field("family", &self.family.as_ref().map(BuiltinFamily::name))
            .field("exponents", &self.exponents)
            .finish_non_exhaustive()
    }
}

/// Chebyshev points of the first kind on `(-1, 1)`, increasing.
pub fn chebyshev_interior(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -((k as f64 + 0.5) * PI / n as f64).cos())
        .collect()
}

/// Chebyshev-Lobatto points on `[-1, 1]`, increasing, endpoints included.
pub fn chebyshev_lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let mut v: Vec<f64> = (0..n)
        .map(|k| -(k as f64 * PI / (n - 1) as f64).cos())
        .collect();
    v[0] = -1.0;
    v[n - 1] = 1.0;
    if n % 2 == 1 {
        v[n / 2] = 0.0;
    }
    v
}

/// Builds and validates a problem with `g = d^{1/(p-1)} f`.
pub fn build_problem(p: f64, diffusion: ScalarFn, reaction: ScalarFn) -> Result<ProblemSpec> {
    let spec = assemble(p, diffusion, reaction)?;
    spec.check_potential()?;
    Ok(spec)
}

/// Like [`build_problem`] but skips the positivity check on `G`, so that
/// problems with `G(1) < 0` can still be inspected (see
/// [`crate::speed::classify_branch`]).
pub fn build_problem_relaxed(p: f64, diffusion: ScalarFn, reaction: ScalarFn) -> Result<ProblemSpec> {
    assemble(p, diffusion, reaction)
}

fn assemble(p: f64, diffusion: ScalarFn, reaction: ScalarFn) -> Result<ProblemSpec> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    let p_conj = p / (p - 1.0);
    let grid = chebyshev_interior(VALIDATION_POINTS);

    for &s in [-1.0].iter().chain(grid.iter()).chain([1.0].iter()) {
        let d = diffusion(s);
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::NonPositiveDiffusion { at: s, value: d });
        }
    }

    let q = 1.0 / (p - 1.0);
    let g = |s: f64| diffusion(s).powf(q) * reaction(s);
    let values: Vec<f64> = grid.iter().map(|&s| g(s)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::SignStructureViolation(format!(
            "g is not finite at s = {}",
            grid[i]
        )));
    }
    let g_sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if g_sup == 0.0 {
        return Err(Error::SignStructureViolation("g vanishes identically".into()));
    }
    let thr = ROUNDOFF * g_sup.max(1.0);
    for end in [-1.0, 1.0] {
        let v = g(end);
        if v.abs() > thr {
            return Err(Error::SignStructureViolation(format!(
                "g({end}) = {v:e} does not vanish"
            )));
        }
    }

    // Sign pattern on the grid, ignoring roundoff-sized values.
    let signs: Vec<(usize, i8)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > thr)
        .map(|(i, v)| (i, if *v > 0.0 { 1 } else { -1 }))
        .collect();
    let flips: Vec<usize> = signs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].1 != w[1].1)
        .map(|(k, _)| k)
        .collect();
    match flips.as_slice() {
        [] => {
            return Err(Error::SignStructureViolation(
                "g does not change sign in (-1, 1)".into(),
            ))
        }
        [k] if signs[*k].1 > 0 => {}
        [k] => {
            return Err(Error::SignStructureViolation(format!(
                "g changes sign from negative to positive near s = {:.6}",
                grid[signs[*k].0]
            )))
        }
        many => {
            let at: Vec<String> = many
                .iter()
                .map(|&k| format!("{:.6}", grid[signs[k + 1].0]))
                .collect();
            return Err(Error::SignStructureViolation(format!(
                "g changes sign {} times (near s = {})",
                many.len(),
                at.join(", ")
            )));
        }
    }

    let k = flips[0];
    let (mut lo, mut hi) = (grid[signs[k].0], grid[signs[k + 1].0]);
    while hi - lo > S0_TOL {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v > 0.0 {
            lo = mid;
        } else if v < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let s0 = 0.5 * (lo + hi);

    Ok(ProblemSpec {
        p,
        p_conj,
        diffusion,
        reaction,
        s0,
        g_sup,
        exponents: None,
        family: None,
        resolution: 0.0,
        quad: QuadOptions::default(),
    })
}

impl ProblemSpec {
    /// Problem for a builtin family; closed-form exponents are attached when
    /// the family has them.
    pub fn from_family(family: BuiltinFamily, p: f64, diffusion: Diffusion) -> Result<Self> {
        family.check()?;
        let (reaction, d) = match &family {
            BuiltinFamily::Tabulated(_) | BuiltinFamily::Manufactured(_) => {
                (family.reaction(p), Diffusion::default().handle())
            }
            _ => (family.reaction(p), diffusion.handle()),
        };
        let mut spec = build_problem(p, d.clone(), reaction)?;
        if let BuiltinFamily::Tabulated(t) = &family {
            spec.resolution = t.endpoint_resolution();
        }
        if let Some(e) = family.analytic_exponents(p, d(-1.0), d(1.0)) {
            spec.exponents = Some(e?);
        }
        spec.family = Some(family);
        Ok(spec)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `p' = p/(p-1)`.
    pub fn p_conj(&self) -> f64 {
        self.p_conj
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn d(&self, s: f64) -> f64 {
        (self.diffusion)(s)
    }

    pub fn f(&self, s: f64) -> f64 {
        (self.reaction)(s)
    }

    pub fn g(&self, r: f64) -> f64 {
        self.d(r).powf(1.0 / (self.p - 1.0)) * self.f(r)
    }

    /// Largest `|g|` seen on the validation grid.
    pub fn g_sup(&self) -> f64 {
        self.g_sup
    }

    pub fn family(&self) -> Option<&BuiltinFamily> {
        self.family.as_ref()
    }

    pub fn diffusion_handle(&self) -> ScalarFn {
        self.diffusion.clone()
    }

    pub fn reaction_handle(&self) -> ScalarFn {
        self.reaction.clone()
    }

    pub fn exponents(&self) -> Option<&AsymptoticExponents> {
        self.exponents.as_ref()
    }

    /// Replaces the endpoint exponents; user-supplied values always win over
    /// estimates.
    pub fn with_exponents(mut self, exponents: AsymptoticExponents) -> Self {
        self.exponents = Some(exponents);
        self
    }

    pub fn without_exponents(mut self) -> Self {
        self.exponents = None;
        self
    }

    /// Smallest distance from `±1` at which `g` carries information (the
    /// table spacing for tabulated reactions, zero otherwise).
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn quad_options(&self) -> QuadOptions {
        self.quad
    }

    pub fn with_quad_tolerance(mut self, abs_tol: f64) -> Self {
        self.quad.abs_tol = abs_tol;
        self
    }

    /// `G(r) = ∫_{-1}^r g(s) ds`.
    pub fn potential(&self, r: f64) -> Result<f64> {
        self.potential_with(r, self.quad)
    }

    pub fn potential_with(&self, r: f64, opts: QuadOptions) -> Result<f64> {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!("r = {r} outside [-1, 1]")));
        }
        if r == -1.0 {
            return Ok(0.0);
        }
        integrate_with_breaks(|s| self.g(s), -1.0, r, &[self.s0], opts).map(|q| q.value)
    }

    /// `G` on an increasing grid starting at `-1`, accumulated panel by
    /// panel.
    pub fn potential_on_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.first() != Some(&-1.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "grid must be increasing and start at -1".into(),
            ));
        }
        let opts = QuadOptions {
            abs_tol: self.quad.abs_tol / grid.len() as f64,
            ..self.quad
        };
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in grid.windows(2) {
            acc += integrate_with_breaks(|s| self.g(s), w[0], w[1], &[self.s0], opts)?.value;
            out.push(acc);
        }
        Ok(out)
    }

    /// The reflected problem `r ↦ -r` with `g` replaced by `-g(-r)`, so that
    /// its potential from `-1` is `∫_{-r}^{1} -g` of the original.
    pub fn mirrored(self) -> Self {
        let d = self.diffusion.clone();
        let f = self.reaction.clone();
        let exps = self.exponents.map(|e| AsymptoticExponents {
            gamma_minus: e.gamma_plus,
            gamma0_minus: e.gamma0_plus,
            gamma_plus: e.gamma_minus,
            gamma0_plus: e.gamma0_minus,
            gamma_minus_err: e.gamma_plus_err,
            gamma_plus_err: e.gamma_minus_err,
            residual_minus: e.residual_plus,
            residual_plus: e.residual_minus,
            ..e
        });
        Self {
            diffusion: Arc::new(move |s| d(-s)),
            reaction: Arc::new(move |s| -f(-s)),
            s0: -self.s0,
            exponents: exps,
            family: None,
            ..self
        }
    }

    fn check_potential(&self) -> Result<()> {
        let mut grid = vec![-1.0];
        grid.extend(chebyshev_interior(VALIDATION_POINTS));
        let pot = self.potential_on_grid(&grid)?;
        let thr = ROUNDOFF * self.g_sup.max(1.0);
        for (&r, &v) in grid.iter().zip(&pot).skip(1) {
            if v <= 0.0 && v.abs() > thr {
                return Err(Error::HypothesisGFails { at: r, value: v });
            }
        }
        Ok(())
    }
}

/// `G(r)` for a validated problem.
pub fn potential_g(spec: &ProblemSpec, r: f64) -> Result<f64> {
    spec.potential(r)
}

/// Least-squares fit of `log|g|` against `log` of the distance to each
/// endpoint, on geometric samples `window·2^{-j}`.
pub fn estimate_exponents(spec: &ProblemSpec, window: f64) -> Result<AsymptoticExponents> {
    estimate_exponents_with(spec, window, DEFAULT_FIT_THRESHOLD)
}

pub fn estimate_exponents_with(
    spec: &ProblemSpec,
    window: f64,
    residual_threshold: f64,
) -> Result<AsymptoticExponents> {
    if !(window > 0.0 && window < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fit window must lie in (0, 1), got {window}"
        )));
    }
    let dists: Vec<f64> = (0..DEFAULT_FIT_SAMPLES)
        .map(|j| window * 0.5f64.powi(j as i32))
        .filter(|&s| s >= spec.resolution())
        .collect();
    if dists.len() < 4 {
        return Err(Error::PoorFit(format!(
            "only {} samples above the data resolution {:e}",
            dists.len(),
            spec.resolution()
        )));
    }

    let left = fit_side(&dists, |s| spec.g(-1.0 + s), "left")?;
    let right = fit_side(&dists, |s| -spec.g(1.0 - s), "right")?;
    for (side, fit) in [("left", &left), ("right", &right)] {
        if fit.residual > residual_threshold {
            return Err(Error::PoorFit(format!(
                "{side} log-log residual {:.3e} exceeds {residual_threshold:.3e}",
                fit.residual
            )));
        }
    }
    let mut e = AsymptoticExponents::new(
        left.slope,
        left.intercept.exp(),
        right.slope,
        right.intercept.exp(),
        ExponentSource::Estimated,
    )
    .map_err(|err| Error::PoorFit(err.to_string()))?;
    e.gamma_minus_err = left.slope_err;
    e.gamma_plus_err = right.slope_err;
    e.residual_minus = left.residual;
    e.residual_plus = right.residual;
    Ok(e)
}

struct LineFit {
    slope: f64,
    intercept: f64,
    slope_err: f64,
    residual: f64,
}

fn fit_side(dists: &[f64], g: impl Fn(f64) -> f64, side: &str) -> Result<LineFit> {
    let mut xs = Vec::with_capacity(dists.len());
    let mut ys = Vec::with_capacity(dists.len());
    for &s in dists {
        let v = g(s);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::PoorFit(format!(
                "g has the wrong sign at distance {s:e} from the {side} endpoint"
            )));
        }
        xs.push(s.ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        slope_err: (ss / (n - 2.0) / sxx).sqrt(),
        residual: (ss / n).sqrt(),
    })
}
