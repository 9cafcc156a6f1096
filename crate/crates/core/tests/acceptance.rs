//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the binary
//! exits non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fkpp_core::harness::{manufactured_matrix, MANUFACTURED_KAPPA};
use fkpp_core::wave::{fd_residual, reconstruct_with, ReconstructOptions};
use fkpp_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const TOL_C: f64 = 1e-10;
const TOL_ODE: f64 = 1e-10;

const CUBIC_S0: [f64; 3] = [0.15, 0.3, 0.45];
const CUBIC_C_TOL: f64 = 1e-7;
const CUBIC_Y_TOL: f64 = 1e-7;
const CUBIC_U_TOL: f64 = 1e-5;
const CUBIC_TIME: Duration = Duration::from_secs(1);

const STATIONARY_ALPHA: [f64; 3] = [1.2, 1.5, 1.8];
const STATIONARY_Y_TOL: f64 = 1e-8;
const WIDTH_REL_TOL: f64 = 1e-4;

const MATRIX_C_TOL: f64 = 1e-8;
const MATRIX_Y_TOL: f64 = 1e-6;
const MATRIX_TIME: Duration = Duration::from_secs(30);

const MONOTONE_PAIRS: usize = 100;
const MONOTONE_SEED: u64 = 20_240_601;
const MONOTONE_C_MIN: f64 = -1.5;

const ENVELOPE_RHO: f64 = 0.05;

const RESIDUAL_COARSE: usize = 256;
const RESIDUAL_FINE: usize = 512;
const RESIDUAL_RANGE: (f64, f64) = (-8.0, 8.0);
const RESIDUAL_WINDOW: (f64, f64) = (-6.0, 6.0);
const RESIDUAL_DECAY: f64 = 4.0;

const PROBE_FACTOR: f64 = 10.0;

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sup_error(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, points: &[f64]) -> f64 {
    points.iter().map(|&r| (f(r) - g(r)).abs()).fold(0.0, f64::max)
}

fn closed_form_cubic() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for s0 in CUBIC_S0 {
        let start = Instant::now();
        let spec = cubic(s0);
        let result = solve_cstar(&spec, TOL_C, TOL_ODE).map_err(|e| e.to_string())?;
        let wave = reconstruct(&spec, &result, 0.0, wave::DEFAULT_SAMPLES).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let dc = (result.c_star + SQRT2 * s0).abs();
        let dy = sup_error(|r| result.profile.eval(r), cubic_y, &cheb(4000));
        let du = wave
            .xi
            .iter()
            .zip(&wave.u)
            .map(|(&x, &u)| (u - cubic_u(x)).abs())
            .fold(0.0, f64::max);
        let pass = dc <= CUBIC_C_TOL && dy <= CUBIC_Y_TOL && du <= CUBIC_U_TOL && elapsed <= CUBIC_TIME;
        ok &= pass;
        lines.push(format!(
            "s0={s0}: |dc|={dc:.1e} |dy|={dy:.1e} |dU|={du:.1e} t={:.0}ms",
            elapsed.as_secs_f64() * 1e3
        ));
    }
    ensure(ok, lines.join("; "))
}

fn stationary_branch() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for alpha in STATIONARY_ALPHA {
        let spec = double_well(alpha);
        let result = solve_cstar(&spec, TOL_C, TOL_ODE).map_err(|e| e.to_string())?;
        let wave = reconstruct(&spec, &result, 0.0, wave::DEFAULT_SAMPLES).map_err(|e| e.to_string())?;
        let dy = sup_error(|r| result.profile.eval(r), |r| double_well_y(alpha, r), &cheb(4000));
        let width = wave.x_minus1 - wave.x1;
        let oracle = double_well_width(alpha);
        let rel = (width / oracle - 1.0).abs();
        let classes = (wave.classes.left, wave.classes.right);
        let pass = result.branch == Branch::Stationary
            && result.c_star == 0.0
            && dy <= STATIONARY_Y_TOL
            && classes == (Interface::Finite, Interface::Finite)
            && rel <= WIDTH_REL_TOL;
        ok &= pass;
        lines.push(format!(
            "alpha={alpha}: {:?} c*={} |dy|={dy:.1e} {:?} width rel err={rel:.1e}",
            result.branch, result.c_star, classes
        ));
    }
    ensure(ok, lines.join("; "))
}

fn interface_rule() -> Outcome {
    use Interface::*;
    let table = [
        (2.0, 0.5, Finite),
        (2.0, 1.0, Infinite),
        (1.5, 0.4, Finite),
        (1.5, 0.6, Infinite),
        (3.0, 2.5, Infinite),
        (3.0, 1.0, Undetermined),
    ];
    let mut mismatches = Vec::new();
    for (p, gamma, want) in table {
        let e = AsymptoticExponents::symmetric(gamma, 1.0, ExponentSource::UserSupplied).unwrap();
        let got = classify_interfaces(&e, p);
        if (got.left, got.right) != (want, want) {
            mismatches.push(format!("(p={p}, gamma={gamma}) -> {:?}/{:?}", got.left, got.right));
        }
    }
    ensure(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{} of {} rows match", table.len(), table.len())
        } else {
            mismatches.join("; ")
        },
    )
}

fn manufactured_matrix_recovery() -> Outcome {
    let start = Instant::now();
    let mut rejected = Vec::new();
    let mut bad = Vec::new();
    let mut recovered = 0;
    for (p, a, b, c) in manufactured_matrix() {
        let tag = format!("p={p} a={a} b={b} c={c}");
        let mp = match manufactured_problem(MANUFACTURED_KAPPA, a, b, c, p) {
            Ok(mp) => mp,
            Err(e) => {
                rejected.push(format!("{tag} ({e})"));
                continue;
            }
        };
        match solve_cstar(&mp.spec, TOL_C, TOL_ODE) {
            Ok(r) => {
                let dc = (r.c_star - c).abs();
                let dy = sup_error(|x| r.profile.eval(x), |x| mp.y_target(x), &cheb(2000));
                if dc <= MATRIX_C_TOL && dy <= MATRIX_Y_TOL {
                    recovered += 1;
                } else {
                    bad.push(format!("{tag}: |dc|={dc:.1e} |dy|={dy:.1e}"));
                }
            }
            Err(e) => bad.push(format!("{tag}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let total = manufactured_matrix().len();
    let detail = format!(
        "{recovered}/{total} recovered in {:.1}s; rejected: [{}]; failed: [{}]",
        elapsed.as_secs_f64(),
        rejected.join(", "),
        bad.join(", ")
    );
    ensure(recovered == total && elapsed <= MATRIX_TIME, detail)
}

/// The accepted part of the matrix, whose rejections must agree with an
/// independent dense sampling of `g`.
fn manufactured_valid_subset() -> Outcome {
    let mut accepted = 0;
    let mut bad = Vec::new();
    for (p, a, b, c) in manufactured_matrix() {
        let params = problem::ManufacturedParams { kappa: MANUFACTURED_KAPPA, a, b, c };
        let sampled = harness::sampled_sign_structure(&params, p);
        let Ok(mp) = manufactured_problem(MANUFACTURED_KAPPA, a, b, c, p) else {
            if sampled {
                bad.push(format!("p={p} a={a} b={b} c={c}: rejected but sampling is valid"));
            }
            continue;
        };
        accepted += 1;
        let r = solve_cstar(&mp.spec, TOL_C, TOL_ODE).map_err(|e| e.to_string())?;
        let dc = (r.c_star - c).abs();
        let dy = sup_error(|x| r.profile.eval(x), |x| mp.y_target(x), &cheb(2000));
        if !(sampled && dc <= MATRIX_C_TOL && dy <= MATRIX_Y_TOL) {
            bad.push(format!("p={p} a={a} b={b} c={c}: |dc|={dc:.1e} |dy|={dy:.1e}"));
        }
    }
    ensure(
        accepted > 0 && bad.is_empty(),
        format!("{accepted} accepted instances recovered, rejections confirmed by sampling [{}]", bad.join(", ")),
    )
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MONOTONE_SEED);
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    for _ in 0..MONOTONE_PAIRS {
        let s0 = rng.gen_range(0.05..0.6);
        let a = rng.gen_range(MONOTONE_C_MIN..=0.0);
        let b = rng.gen_range(MONOTONE_C_MIN..=0.0);
        let (c1, c2) = if a <= b { (a, b) } else { (b, a) };
        let report = check_forward_comparison(&cubic(s0), c1, c2, TOL_ODE);
        worst = worst.min(report.margin);
        if !report.passed {
            violations.push(format!("s0={s0:.3} c1={c1:.4} c2={c2:.4}"));
        }
    }
    ensure(
        violations.is_empty(),
        format!(
            "{} violations in {MONOTONE_PAIRS} pairs, worst margin {worst:.2e} [{}]",
            violations.len(),
            violations.join(", ")
        ),
    )
}

/// Every solved instance with exponents available.
fn solved_instances() -> Vec<(String, ProblemSpec)> {
    let mut out: Vec<(String, ProblemSpec)> = Vec::new();
    for s0 in CUBIC_S0 {
        out.push((format!("cubic s0={s0}"), cubic(s0)));
    }
    for alpha in [1.2, 1.5, 1.8, 2.0] {
        out.push((format!("double_well alpha={alpha}"), double_well(alpha)));
    }
    out.push(("alpha_bistable(1.5, 0.2) p=1.5".into(), alpha_bistable(1.5, 0.2, 1.5)));
    out.push(("alpha_bistable(3.5, 0.3) p=3".into(), alpha_bistable(3.5, 0.3, 3.0)));
    for (p, a, b, c) in manufactured_matrix() {
        if let Ok(mp) = manufactured_problem(MANUFACTURED_KAPPA, a, b, c, p) {
            out.push((mp.label(), mp.spec));
        }
    }
    // a valid degenerate (p = 3) planted problem outside the matrix
    let mp = manufactured_problem(1.0, 2.0, 1.4, -0.5, 3.0).unwrap();
    out.push((mp.label(), mp.spec));
    out
}

fn envelopes() -> Outcome {
    let mut fails = Vec::new();
    let mut count = 0;
    for (name, spec) in solved_instances() {
        let result = solve_cstar(&spec, TOL_C, TOL_ODE).map_err(|e| format!("{name}: {e}"))?;
        match check_envelopes(&spec, &result, ENVELOPE_RHO) {
            Ok(r) if r.passed => count += 1,
            Ok(r) => fails.push(format!("{name}: margin {:.2e}", r.margin)),
            Err(e) => fails.push(format!("{name}: {e}")),
        }
    }
    ensure(
        fails.is_empty(),
        format!("{count} instances hold on (-1, -1+{ENVELOPE_RHO}) [{}]", fails.join(", ")),
    )
}

fn residual_at(spec: &ProblemSpec, result: &CStarResult, n: usize) -> std::result::Result<f64, String> {
    let opts = ReconstructOptions {
        samples: n,
        xi_range: Some(RESIDUAL_RANGE),
        ..Default::default()
    };
    let wave = reconstruct_with(spec, result, &opts).map_err(|e| e.to_string())?;
    Ok(fd_residual(spec, &wave, &wave.u, RESIDUAL_WINDOW))
}

fn residual_decay() -> Outcome {
    let mut instances: Vec<(String, ProblemSpec)> =
        CUBIC_S0.iter().map(|&s0| (format!("cubic s0={s0}"), cubic(s0))).collect();
    instances.push(("double_well alpha=2".into(), double_well(2.0)));
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, spec) in instances {
        let result = solve_cstar(&spec, TOL_C, TOL_ODE).map_err(|e| e.to_string())?;
        let coarse = residual_at(&spec, &result, RESIDUAL_COARSE)?;
        let fine = residual_at(&spec, &result, RESIDUAL_FINE)?;
        let ratio = coarse / fine;
        ok &= ratio >= RESIDUAL_DECAY;
        lines.push(format!("{name}: {coarse:.2e} -> {fine:.2e} (x{ratio:.3})"));
    }
    ensure(ok, lines.join("; "))
}

fn uniqueness_probes() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, spec) in solved_instances() {
        let result = solve_cstar(&spec, TOL_C, TOL_ODE).map_err(|e| format!("{name}: {e}"))?;
        if result.branch != Branch::TravellingWave {
            continue;
        }
        let dc = PROBE_FACTOR * TOL_C;
        let above = shoot(&spec, result.c_star + dc, TOL_ODE).map_err(|e| e.to_string())?;
        let below = shoot(&spec, result.c_star - dc, TOL_ODE).map_err(|e| e.to_string())?;
        let pass = matches!(above.outcome, ShotOutcome::Overshoot { .. })
            && matches!(below.outcome, ShotOutcome::Undershoot { .. });
        ok &= pass;
        lines.push(if pass {
            format!("{name} ok")
        } else {
            format!("{name}: {:?} / {:?}", above.outcome, below.outcome)
        });
    }
    ensure(ok, lines.join("; "))
}

fn main() {
    type Criterion = (&'static str, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1", "closed-form cubic wave", closed_form_cubic),
        ("2", "stationary branch", stationary_branch),
        ("3", "interface rule", interface_rule),
        ("4", "manufactured matrix", manufactured_matrix_recovery),
        ("4b", "manufactured matrix, valid subset", manufactured_valid_subset),
        ("5", "monotonicity", monotonicity),
        ("6", "envelopes", envelopes),
        ("7", "residual decay", residual_decay),
        ("8", "uniqueness probes", uniqueness_probes),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id} {tag} {name}: {detail}");
    }
    println!("acceptance: {} of {} checks passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
