//! Travelling waves for bistable reaction–diffusion equations with
//! p-Laplacian-type diffusion,
//!
//! ```text
//! u_t = (d(u) |u_x|^{p-2} u_x)_x + f(u),
//! ```
//!
//! computed through the phase-plane reduction `y(U) = d(U)^{p'} |U'|^p`,
//! which turns the wave equation into the scalar first-order problem
//! `y' = p' (c (y⁺)^{1/p} + g(r))`, `y(-1) = y(1) = 0`.
//!
//! The wave speed `c*` is found by shooting forward from `r = -1` and
//! bisecting on whether the shot overshoots, and the profile `U(ξ)` is then
//! recovered by quadrature.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod interp;
pub mod problem;
pub mod quadrature;
pub mod shooter;
pub mod speed;
pub mod wave;

pub use error::{Error, Result};
pub use problem::{
    build_problem, estimate_exponents, potential_g, AsymptoticExponents, BuiltinFamily,
    Diffusion, ExponentSource, ProblemSpec,
};
pub use harness::{
    check_backward_comparison, check_envelopes, check_first_integral, check_forward_comparison,
    manufactured_problem, run_suite, ManufacturedProblem, PropertyReport, SuiteOptions, SuiteReport,
};
pub use shooter::{
    shoot, shoot_from, terminal_value, ShootOptions, ShotOutcome, TerminalValue, Trajectory,
};
pub use speed::{bracket, classify_branch, solve_cstar, Branch, CStarResult, SolveOptions};
pub use wave::{classify_interfaces, evaluate, reconstruct, InterfaceClass, Interface, WaveProfile};
