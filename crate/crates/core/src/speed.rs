//! The wave speed `c* = inf { c : y_c(1) > 0 }`.
//!
//! `y_c(1)` increases with `c`, so `c*` is found by bisecting on whether a
//! shot overshoots. When `G(1) = 0` the answer is `c* = 0` with the explicit
//! profile `y = p' G`, and no shooting is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{chebyshev_lobatto, ProblemSpec};
use crate::quadrature::QuadOptions;
use crate::shooter::{shoot, ShotOutcome, Trajectory};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest total shift of the final speed while refining the profile.
const MAX_NUDGE: f64 = 1e-3;
pub const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    TravellingWave,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol_c: f64,
    pub tol_ode: f64,
    /// Threshold on `|G(1)|` for the stationary branch; `None` uses
    /// `1e-12 · max(1, sup|g|)`.
    pub g1_tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_c: 1e-10,
            tol_ode: 1e-10,
            g1_tol: None,
        }
    }
}

impl SolveOptions {
    pub fn new(tol_c: f64, tol_ode: f64) -> Self {
        Self {
            tol_c,
            tol_ode,
            g1_tol: None,
        }
    }

    /// Largest acceptable `|y(1)|` for the returned profile.
    pub fn boundary_tol(&self) -> f64 {
        (100.0 * self.tol_ode).max(1e-8)
    }
}

/// One bracket update: the interval after the shot, and the shot's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketStep {
    pub c_lo: f64,
    pub c_hi: f64,
    pub c: f64,
    pub outcome: ShotOutcome,
}

#[derive(Debug, Clone)]
pub struct CStarResult {
    pub c_star: f64,
    pub bracket_history: Vec<BracketStep>,
    pub profile: Trajectory,
    pub terminal_residual: f64,
    pub branch: Branch,
    pub iterations: usize,
    pub a_priori_cap: Option<f64>,
    pub g1: f64,
}

/// JSON summary of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub schema_version: u32,
    pub c_star: f64,
    pub branch: Branch,
    pub terminal_residual: f64,
    pub iterations: usize,
    pub a_priori_cap: Option<f64>,
}

impl CStarResult {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            schema_version: SCHEMA_VERSION,
            c_star: self.c_star,
            branch: self.branch,
            terminal_residual: self.terminal_residual,
            iterations: self.iterations,
            a_priori_cap: self.a_priori_cap,
        }
    }
}

/// `G(1)` to a tolerance well below the stationary threshold.
pub fn potential_at_one(spec: &ProblemSpec) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 0.0,
        max_panels: 20_000,
    };
    spec.potential_with(1.0, opts)
}

fn default_g1_tol(spec: &ProblemSpec) -> f64 {
    1e-12 * spec.g_sup().max(1.0)
}

/// Stationary if `|G(1)| ≤ tol`, travelling wave if `G(1) > tol`.
pub fn classify_branch(spec: &ProblemSpec, tol: f64) -> Result<Branch> {
    let g1 = potential_at_one(spec)?;
    if g1 < -tol {
        Err(Error::NegativeG1(g1))
    } else if g1 <= tol {
        Ok(Branch::Stationary)
    } else {
        if g1 < 1e4 * tol {
            log::warn!("G(1) = {g1:e} is barely above the stationary threshold {tol:e}");
        }
        Ok(Branch::TravellingWave)
    }
}

/// Upper bound `(p' G(s0))^{1/p'} / (1 - s0)` on `|c*|`.
pub fn a_priori_cap(spec: &ProblemSpec) -> Result<f64> {
    let gs0 = spec.potential(spec.s0())?;
    Ok((spec.p_conj() * gs0).powf(1.0 / spec.p_conj()) / (1.0 - spec.s0()))
}

/// Returns `(c_lo, c_hi)` with an undershoot at `c_lo` and an overshoot at
/// `c_hi`, descending geometrically from `c = -1`.
pub fn bracket(spec: &ProblemSpec, tol: f64) -> Result<(f64, f64)> {
    let g1_tol = default_g1_tol(spec);
    if classify_branch(spec, g1_tol)? != Branch::TravellingWave {
        return Err(Error::NotTravellingWave);
    }
    let (lo, hi, _) = bracket_shots(spec, tol, a_priori_cap(spec)?)?;
    Ok((lo, hi))
}

fn bracket_shots(spec: &ProblemSpec, tol: f64, cap: f64) -> Result<(f64, f64, Vec<BracketStep>)> {
    let mut hist = Vec::new();
    let mut c_hi = 0.0;
    let limit = cap * 1.001;
    let mut c = -1.0f64;
    loop {
        let last = c.abs() >= limit;
        if last {
            c = -limit;
        }
        let t = shoot(spec, c, tol)?;
        if t.outcome.is_overshoot_side() {
            c_hi = c;
            hist.push(BracketStep {
                c_lo: f64::NEG_INFINITY,
                c_hi,
                c,
                outcome: t.outcome,
            });
        } else {
            hist.push(BracketStep {
                c_lo: c,
                c_hi,
                c,
                outcome: t.outcome,
            });
            return Ok((c, c_hi, hist));
        }
        if last {
            return Err(Error::BracketExhausted { reached: c, cap });
        }
        c *= 2.0;
    }
}

/// Solves for `c*` and the boundary-value profile.
pub fn solve_cstar(spec: &ProblemSpec, tol_c: f64, tol_ode: f64) -> Result<CStarResult> {
    solve_cstar_with(spec, &SolveOptions::new(tol_c, tol_ode))
}

pub fn solve_cstar_with(spec: &ProblemSpec, opts: &SolveOptions) -> Result<CStarResult> {
    for (name, v) in [("tol_c", opts.tol_c), ("tol_ode", opts.tol_ode)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let g1 = potential_at_one(spec)?;
    let g1_tol = opts.g1_tol.unwrap_or_else(|| default_g1_tol(spec));
    match classify_branch(spec, g1_tol)? {
        Branch::Stationary => stationary(spec, g1, opts),
        Branch::TravellingWave => travelling(spec, g1, opts),
    }
}

/// Nodes for the stationary profile: Chebyshev-Lobatto points plus
/// geometric refinement toward both endpoints.
pub fn stationary_grid() -> Vec<f64> {
    let mut grid = chebyshev_lobatto(2049);
    let mut s = 0.1;
    while s > 1e-13 {
        grid.push(-1.0 + s);
        grid.push(1.0 - s);
        s *= 0.95;
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    grid
}

fn stationary(spec: &ProblemSpec, g1: f64, opts: &SolveOptions) -> Result<CStarResult> {
    let grid = stationary_grid();
    let pot = spec.potential_on_grid(&grid)?;
    // Right of s0, accumulate from r = 1 (where G vanishes on this branch)
    // so that y keeps its relative accuracy next to the endpoint.
    let mirrored: Vec<f64> = grid.iter().rev().map(|r| -r).collect();
    let flipped = spec.clone().mirrored().potential_on_grid(&mirrored)?;
    let n = grid.len();
    let pc = spec.p_conj();
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let v = if grid[i] <= spec.s0() { pot[i] } else { flipped[n - 1 - i] };
            (pc * v).max(0.0)
        })
        .collect();
    values[0] = 0.0;
    values[n - 1] = 0.0;
    let slopes: Vec<f64> = grid.iter().map(|&r| pc * spec.g(r)).collect();
    let residual = (pc * g1).abs();
    let profile = Trajectory::from_samples(
        0.0,
        grid,
        values,
        slopes,
        ShotOutcome::Converged { y1: pc * g1 },
        opts.tol_ode,
    );
    Ok(CStarResult {
        c_star: 0.0,
        bracket_history: Vec::new(),
        profile,
        terminal_residual: residual,
        branch: Branch::Stationary,
        iterations: 0,
        a_priori_cap: None,
        g1,
    })
}

fn travelling(spec: &ProblemSpec, g1: f64, opts: &SolveOptions) -> Result<CStarResult> {
    let cap = a_priori_cap(spec)?;
    let (mut c_lo, mut c_hi, mut hist) = bracket_shots(spec, opts.tol_ode, cap)?;
    let mut iterations = 0usize;
    while c_hi - c_lo >= opts.tol_c {
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::NonConvergent(format!(
                "bracket [{c_lo}, {c_hi}] still wider than {} after {MAX_BISECTIONS} bisections",
                opts.tol_c
            )));
        }
        let mid = 0.5 * (c_lo + c_hi);
        if mid <= c_lo || mid >= c_hi {
            break;
        }
        let t = shoot(spec, mid, opts.tol_ode)?;
        if t.outcome.is_overshoot_side() {
            c_hi = mid;
        } else {
            c_lo = mid;
        }
        hist.push(BracketStep {
            c_lo,
            c_hi,
            c: mid,
            outcome: t.outcome,
        });
    }

    // Re-shoot the overshoot end more accurately; step up with doubling
    // steps if it flips (rough data can make the ODE error exceed tol_c).
    let fine = opts.tol_ode * 0.1;
    let mut profile = shoot(spec, c_hi, fine)?;
    let (c_bisected, mut step) = (c_hi, opts.tol_c);
    while !profile.outcome.is_overshoot_side() && c_hi + step < 0.0 && step < MAX_NUDGE {
        c_hi += step;
        step *= 2.0;
        profile = shoot(spec, c_hi, fine)?;
    }
    if c_hi - c_bisected > opts.tol_c && profile.outcome.is_overshoot_side() {
        log::warn!(
            "speed moved by {:e} to keep the refined shot on the overshoot side",
            c_hi - c_bisected
        );
    }
    let terminal_residual = match profile.outcome {
        ShotOutcome::Overshoot { y1 } | ShotOutcome::Converged { y1 } => y1.abs(),
        ShotOutcome::Undershoot { r0 } => {
            return Err(Error::NonConvergent(format!(
                "final shot at c = {c_hi} crossed zero at r = {r0}"
            )))
        }
    };
    if terminal_residual > opts.boundary_tol() {
        return Err(Error::NonConvergent(format!(
            "terminal residual {terminal_residual:e} exceeds {:e}",
            opts.boundary_tol()
        )));
    }
    if let Some(i) = profile.values[1..profile.len() - 1]
        .iter()
        .position(|&v| v <= 0.0)
    {
        return Err(Error::ProfileNotPositive {
            at: profile.nodes[i + 1],
            value: profile.values[i + 1],
        });
    }
    Ok(CStarResult {
        c_star: c_hi,
        bracket_history: hist,
        profile,
        terminal_residual,
        branch: Branch::TravellingWave,
        iterations,
        a_priori_cap: Some(cap),
        g1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_problem_relaxed, BuiltinFamily, Diffusion, ScalarFn};
    use std::sync::Arc;

    fn cubic(s0: f64) -> ProblemSpec {
        ProblemSpec::from_family(BuiltinFamily::CubicBistable { s0 }, 2.0, Diffusion::default()).unwrap()
    }

    fn double_well(alpha: f64) -> ProblemSpec {
        ProblemSpec::from_family(BuiltinFamily::DoubleWellAlpha { alpha }, 2.0, Diffusion::default())
            .unwrap()
    }

    #[test]
    fn branches() {
        assert_eq!(classify_branch(&double_well(1.5), 1e-12).unwrap(), Branch::Stationary);
        assert_eq!(classify_branch(&cubic(0.3), 1e-12).unwrap(), Branch::TravellingWave);
        let d: ScalarFn = Arc::new(|_| 1.0);
        let mirrored = build_problem_relaxed(2.0, d, BuiltinFamily::CubicBistable { s0: -0.3 }.reaction(2.0))
            .unwrap();
        assert!(matches!(classify_branch(&mirrored, 1e-12), Err(Error::NegativeG1(_))));
    }

    #[test]
    fn cubic_bracket_is_unit() {
        assert_eq!(bracket(&cubic(0.3), 1e-10).unwrap(), (-1.0, 0.0));
    }

    #[test]
    fn stationary_has_no_bracket() {
        assert!(matches!(bracket(&double_well(1.5), 1e-10), Err(Error::NotTravellingWave)));
    }

    #[test]
    fn cap_for_cubic() {
        let spec = cubic(0.3);
        // G(0.3) = ∫_{-1}^{0.3} s³ - 0.3 s² - s + 0.3 ds
        let anti = |s: f64| s.powi(4) / 4.0 - 0.1 * s.powi(3) - s * s / 2.0 + 0.3 * s;
        let gs0 = anti(0.3) - anti(-1.0);
        let cap = a_priori_cap(&spec).unwrap();
        assert!((cap - (2.0 * gs0).sqrt() / 0.7).abs() < 1e-12);
        assert!(cap > 0.3 * 2f64.sqrt());
    }

    #[test]
    fn cubic_speed() {
        for s0 in [0.15, 0.3] {
            let r = solve_cstar(&cubic(s0), 1e-10, 1e-10).unwrap();
            assert_eq!(r.branch, Branch::TravellingWave);
            assert!((r.c_star + 2f64.sqrt() * s0).abs() < 1e-8, "{s0}: {}", r.c_star);
            assert!(r.terminal_residual <= 1e-8);
        }
    }

    #[test]
    fn bracket_widths_shrink() {
        let r = solve_cstar(&cubic(0.3), 1e-8, 1e-10).unwrap();
        let widths: Vec<f64> = r
            .bracket_history
            .iter()
            .filter(|s| s.c_lo.is_finite())
            .map(|s| s.c_hi - s.c_lo)
            .collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]));
        for s in &r.bracket_history {
            assert!(s.c_lo < s.c_hi);
        }
    }

    #[test]
    fn stationary_profile() {
        let alpha = 1.5;
        let r = solve_cstar(&double_well(alpha), 1e-10, 1e-10).unwrap();
        assert_eq!(r.branch, Branch::Stationary);
        assert_eq!(r.c_star, 0.0);
        for (&x, &y) in r.profile.nodes.iter().zip(&r.profile.values) {
            let exact = (1.0 - x * x).max(0.0).powf(alpha) / alpha;
            assert!((y - exact).abs() < 1e-9, "r = {x}");
        }
    }

    #[test]
    fn summary_serializes() {
        let r = solve_cstar(&double_well(1.5), 1e-10, 1e-10).unwrap();
        let json = serde_json::to_string(&r.summary()).unwrap();
        assert!(json.contains("\"branch\":\"Stationary\""));
        assert!(json.contains("\"schema_version\":1"));
    }
}
