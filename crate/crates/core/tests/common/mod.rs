//! Problem builders and closed-form oracles shared by the integration tests.

#![allow(dead_code)]

use fkpp_core::{BuiltinFamily, Diffusion, ProblemSpec};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn family(f: BuiltinFamily, p: f64) -> ProblemSpec {
    ProblemSpec::from_family(f, p, Diffusion::default()).unwrap()
}

pub fn cubic(s0: f64) -> ProblemSpec {
    family(BuiltinFamily::CubicBistable { s0 }, 2.0)
}

pub fn double_well(alpha: f64) -> ProblemSpec {
    family(BuiltinFamily::DoubleWellAlpha { alpha }, 2.0)
}

pub fn alpha_bistable(alpha: f64, s0: f64, p: f64) -> ProblemSpec {
    family(BuiltinFamily::AlphaBistable { alpha, s0 }, p)
}

/// `y = (1 - r²)² / 2`, the phase-plane solution of the cubic family.
pub fn cubic_y(r: f64) -> f64 {
    let w = 1.0 - r * r;
    0.5 * w * w
}

/// `U(ξ) = -tanh(ξ/√2)`, the cubic wave anchored at `U(0) = 0`.
pub fn cubic_u(xi: f64) -> f64 {
    -(xi / SQRT2).tanh()
}

/// `y₀ = p' G = (1/α)(1 - r²)^α` for the double well with `p = 2`.
pub fn double_well_y(alpha: f64, r: f64) -> f64 {
    (1.0 - r * r).max(0.0).powf(alpha) / alpha
}

/// `∫_{-1}^{1} √α (1 - U²)^{-α/2} dU = √α B(1/2, 1 - α/2)`, the width of
/// the stationary double-well wave.
pub fn double_well_width(alpha: f64) -> f64 {
    alpha.sqrt() * statrs::function::beta::beta(0.5, 1.0 - 0.5 * alpha)
}

/// Chebyshev-clustered points in `[-1, 1]`.
pub fn cheb(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| -(std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect()
}
