//! Physical profiles `U(ξ)`: closed-form waves, interface locations and
//! classes, evaluation, and consistency with the phase-plane solution.

mod common;

use approx::assert_abs_diff_eq;
use fkpp_core::wave::{partial_integral, Side};
use fkpp_core::*;

use common::*;

const TOL: f64 = 1e-10;

fn profile(spec: &ProblemSpec, x0: f64, n: usize) -> WaveProfile {
    let r = solve_cstar(spec, TOL, TOL).unwrap();
    reconstruct(spec, &r, x0, n).unwrap()
}

fn exps(gamma: f64) -> AsymptoticExponents {
    AsymptoticExponents::symmetric(gamma, 1.0, ExponentSource::UserSupplied).unwrap()
}

#[test]
fn cubic_wave_is_a_tanh() {
    let w = profile(&cubic(0.3), 0.0, 2048);
    for (&x, &u) in w.xi.iter().zip(&w.u) {
        assert!((u - cubic_u(x)).abs() < 1e-6, "xi = {x}");
    }
    assert_eq!((w.classes.left, w.classes.right), (Interface::Infinite, Interface::Infinite));
    assert_eq!((w.x1, w.x_minus1), (f64::NEG_INFINITY, f64::INFINITY));
    assert!(w.xi.windows(2).all(|p| p[1] > p[0]));
    assert!(w.u.windows(2).all(|p| p[1] <= p[0]));
    assert!(w.du.iter().all(|&d| d <= 0.0));
}

#[test]
fn sharp_double_well_has_the_oracle_width() {
    let w = profile(&double_well(1.5), 0.0, 2048);
    assert_eq!((w.classes.left, w.classes.right), (Interface::Finite, Interface::Finite));
    assert!(w.x1 < w.x0 && w.x0 < w.x_minus1);
    let width = w.x_minus1 - w.x1;
    assert!((width / double_well_width(1.5) - 1.0).abs() < 1e-4, "{width}");
    // symmetric reaction, symmetric interfaces
    assert_abs_diff_eq!(w.x1, -w.x_minus1, epsilon = 1e-6);
}

#[test]
fn allen_cahn_profile() {
    let w = profile(&double_well(2.0), 0.0, 2048);
    assert_eq!((w.classes.left, w.classes.right), (Interface::Infinite, Interface::Infinite));
    for (&x, &u) in w.xi.iter().zip(&w.u) {
        assert!((u - cubic_u(x)).abs() < 1e-6, "xi = {x}");
    }
}

#[test]
fn classification_examples() {
    let side = |g: f64, p: f64| {
        let c = classify_interfaces(&exps(g), p);
        assert_eq!(c.left, c.right);
        c.left
    };
    assert_eq!(side(0.5, 2.0), Interface::Finite);
    assert_eq!(side(1.0, 2.0), Interface::Infinite);
    assert_eq!(side(1.0, 3.0), Interface::Undetermined);
}

#[test]
fn evaluation_examples() {
    let w = profile(&cubic(0.3), 0.0, 512);
    let (u, du) = evaluate(&w, 0.0);
    assert_abs_diff_eq!(u, 0.0, epsilon = 1e-8);
    assert_abs_diff_eq!(du, -1.0 / SQRT2, epsilon = 1e-7);
    let sharp = profile(&double_well(1.5), 0.7, 512);
    assert_eq!(evaluate(&sharp, sharp.x1 - 0.1), (1.0, 0.0));
    assert_eq!(evaluate(&sharp, sharp.x_minus1 + 0.1), (-1.0, 0.0));
    let (u, du) = evaluate(&sharp, 0.7);
    assert_abs_diff_eq!(u, 0.0, epsilon = 1e-8);
    assert!(du < 0.0);
    // far tails stay inside [-1, 1]
    for x in [-1e3, -50.0, 50.0, 1e3] {
        let (u, _) = evaluate(&w, x);
        assert!((-1.0..=1.0).contains(&u));
    }
}

#[test]
fn shifting_the_anchor_shifts_the_profile() {
    let spec = alpha_bistable(1.5, 0.2, 2.0);
    let r = solve_cstar(&spec, TOL, TOL).unwrap();
    let a = reconstruct(&spec, &r, 0.0, 512).unwrap();
    let b = reconstruct(&spec, &r, 2.5, 512).unwrap();
    assert_abs_diff_eq!(b.x1 - a.x1, 2.5, epsilon = 1e-9);
    assert_abs_diff_eq!(b.x_minus1 - a.x_minus1, 2.5, epsilon = 1e-9);
    for k in 0..=100 {
        let x = a.x1 - 0.5 + (a.x_minus1 - a.x1 + 1.0) * k as f64 / 100.0;
        let (ua, da) = evaluate(&a, x);
        let (ub, db) = evaluate(&b, x + 2.5);
        assert_abs_diff_eq!(ua, ub, epsilon = 1e-9);
        assert_abs_diff_eq!(da, db, epsilon = 1e-9);
    }
}

#[test]
fn first_integral_holds_on_interior_samples() {
    for spec in [cubic(0.45), double_well(1.2), alpha_bistable(1.5, 0.2, 1.5)] {
        let w = profile(&spec, 0.0, 1024);
        for (&u, &du) in w.u.iter().zip(&w.du) {
            if 1.0 - u.abs() > 1e-3 {
                let y = w.phase().eval(u);
                let lhs = spec.d(u).powf(spec.p_conj()) * du.abs().powf(spec.p());
                assert!((lhs - y).abs() <= 1e-6 * y, "u = {u}");
            }
        }
    }
}

#[test]
fn endpoint_integrals_follow_the_classification() {
    // finite side: increments shrink geometrically (the tail decays like
    // s^{1/4} here), so the partial integrals converge
    let spec = double_well(1.5);
    let r = solve_cstar(&spec, TOL, TOL).unwrap();
    let tail: Vec<f64> = [1e-3, 1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&s| partial_integral(&spec, &r.profile, Side::Minus, s).unwrap())
        .collect();
    let steps: Vec<f64> = tail.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(steps.windows(2).all(|d| d[1] < 0.7 * d[0]), "{tail:?}");

    // infinite side: each halving of the distance adds a fixed amount
    let spec = cubic(0.3);
    let r = solve_cstar(&spec, TOL, TOL).unwrap();
    for side in [Side::Minus, Side::Plus] {
        let vals: Vec<f64> = (4..12)
            .map(|k| partial_integral(&spec, &r.profile, side, 0.5f64.powi(k)).unwrap().abs())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] - w[0] > 0.3, "{side:?}: {vals:?}");
        }
    }
}

#[test]
fn exports() {
    let w = profile(&double_well(1.5), 0.0, 64);
    let mut buf = Vec::new();
    w.write_csv(&mut buf).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rd.headers().unwrap(), vec!["xi", "u", "du"]);
    assert_eq!(rd.records().count(), 64);
    let side = w.sidecar();
    assert_eq!(side["left_class"], "Finite");
    assert!(side["x1"].is_f64() && side["x_minus1"].is_f64());
    for key in ["c_star", "x0", "right_class"] {
        assert!(side.get(key).is_some());
    }
}

#[test]
fn too_few_samples_is_an_error() {
    let spec = cubic(0.3);
    let r = solve_cstar(&spec, TOL, TOL).unwrap();
    assert!(reconstruct(&spec, &r, 0.0, 8).is_err());
}
