//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! with a nonzero status if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use cournot_core::certify::{certify_suite, names, trial_seed, verify_named_instance};
use cournot_core::instances::{
    bulow_example, concave_small_shock, concave_two_firm, profit_worstcase, random_game,
    random_shock, welfare_worstcase, RandomGameConfig,
};
use cournot_core::{
    negative_shock_ratio, shock_report, Objective, PriceShock, QuantityProfile, SolveOptions,
};

const SWEEP_SEED: u64 = 20_240_601;
const SWEEP_TRIALS: usize = 1000;

/// `1 − (n−1)²/(4n²)`.
fn profit_ratio_oracle(n: f64) -> f64 {
    1.0 - (n - 1.0) * (n - 1.0) / (4.0 * n * n)
}

/// `1 − (n−1)²/(4(n²+n−1))`.
fn welfare_ratio_oracle(n: f64) -> f64 {
    1.0 - (n - 1.0) * (n - 1.0) / (4.0 * (n * n + n - 1.0))
}

/// Post-shock surplus of the welfare family over its pre-shock surplus 3/2.
fn surplus_ratio_oracle(n: f64) -> f64 {
    let d = n * n + n - 1.0;
    let post =
        (10.0 * n.powi(4) + 22.0 * n.powi(3) - 7.0 * n * n - 24.0 * n + 11.0) / (8.0 * d * d);
    post / 1.5
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

struct Outcome {
    passed: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            passed: true,
            notes: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, note: String) {
        if !ok {
            self.passed = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }

    fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.passed = false;
        self.notes.push(format!("FAILED {what}: {e}"));
    }
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let inst = bulow_example();
    let opts = SolveOptions::default();
    let g = &inst.game;
    let stated =
        |entries: [(&str, &str, f64); 3]| QuantityProfile::from_entries(g, entries).unwrap();
    let x = stated([("a", "m1", 0.0), ("a", "m2", 50.0), ("b", "m2", 50.0)]);
    let y = stated([("a", "m1", 8.0), ("a", "m2", 47.0), ("b", "m2", 51.0)]);
    match shock_report(g, &inst.shock, &opts) {
        Ok(r) => {
            let dx = r.pre.profile.sup_distance(&x);
            let dy = r.post.profile.sup_distance(&y);
            out.require(
                dx <= 1e-7 && dy <= 1e-7,
                format!("profile errors {dx:.1e}/{dy:.1e}"),
            );
            let profits = [
                (r.profits_pre["a"], 3750.0),
                (r.profits_pre["b"], 3750.0),
                (r.profits_post["a"], 3721.5),
                (r.profits_post["b"], 3901.5),
            ];
            let worst = profits
                .iter()
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            out.require(worst <= 1e-6, format!("profit error {worst:.1e}"));
            let gamma = r.gamma_u.as_f64();
            out.require(
                (gamma - 0.99240).abs() <= 1e-6,
                format!("gamma_u {gamma:.8}"),
            );
        }
        Err(e) => out.error("shock report", e),
    }
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new();
    for n in [2usize, 3, 5, 10, 50] {
        let inst = profit_worstcase(n).unwrap();
        match shock_report(&inst.game, &inst.shock, &SolveOptions::default()) {
            Ok(r) => {
                let expected = profit_ratio_oracle(n as f64);
                let e = rel(r.gamma_u.as_f64(), expected);
                out.require(
                    e <= 1e-7,
                    format!("n={n} gamma_u {:.10} rel err {e:.1e}", r.gamma_u.as_f64()),
                );
            }
            Err(e) => out.error(&format!("n={n}"), e),
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new();
    for n in [2usize, 5, 10] {
        let inst = welfare_worstcase(n).unwrap();
        match shock_report(&inst.game, &inst.shock, &SolveOptions::default()) {
            Ok(r) => {
                let got = r.gamma_welfare.as_f64();
                let e = (got - welfare_ratio_oracle(n as f64)).abs();
                out.require(e <= 1e-7, format!("n={n} gamma_U {got:.10} err {e:.1e}"));
                if n == 2 {
                    out.require((got - 0.95).abs() <= 1e-7, "n=2 equals 0.95".into());
                }
            }
            Err(e) => out.error(&format!("n={n}"), e),
        }
    }
    out
}

fn criterion_4(sweep_min_surplus: Option<f64>) -> Outcome {
    let mut out = Outcome::new();
    let opts = SolveOptions::default();
    for n in [2usize, 5, 10] {
        let inst = welfare_worstcase(n).unwrap();
        match shock_report(&inst.game, &inst.shock, &opts) {
            Ok(r) => {
                let got = r.gamma_surplus.as_f64();
                let e = (got - surplus_ratio_oracle(n as f64)).abs();
                out.require(e <= 1e-7, format!("n={n} gamma_S {got:.10} err {e:.1e}"));
                if n == 2 {
                    out.require(
                        (got - 271.0 / 300.0).abs() <= 1e-7,
                        "n=2 equals 271/300".into(),
                    );
                }
            }
            Err(e) => out.error(&format!("n={n}"), e),
        }
    }
    let inst = welfare_worstcase(1000).unwrap();
    match shock_report(&inst.game, &inst.shock, &opts) {
        Ok(r) => {
            let got = r.gamma_surplus.as_f64();
            out.require(
                (got - 5.0 / 6.0).abs() <= 1e-3,
                format!("n=1000 gamma_S {got:.6}"),
            );
        }
        Err(e) => out.error("n=1000", e),
    }
    match sweep_min_surplus {
        Some(v) => out.require(v >= 5.0 / 6.0 - 1e-6, format!("sweep min gamma_S {v:.6}")),
        None => out.error("sweep", "no converged instance"),
    }
    out
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    let opts = SolveOptions::default();
    for k in [4usize, 8, 16] {
        let inst = concave_small_shock(k).unwrap();
        let report = verify_named_instance(&inst, &opts);
        let (x, y) = (
            inst.stated_pre.as_ref().unwrap(),
            inst.stated_post.as_ref().unwrap(),
        );
        let before = inst.game.profit("a", x, None).unwrap();
        let after = inst.game.profit("a", y, Some(&inst.shock)).unwrap();
        let gamma = after / before;
        out.require(
            report.passed && (gamma - 2.0 / k as f64).abs() <= 1e-9,
            format!("small shock k={k} gamma {gamma:.12}"),
        );
    }
    let mut gammas = Vec::new();
    for k in [10usize, 100, 1000] {
        let inst = concave_two_firm(k).unwrap();
        let report = verify_named_instance(&inst, &opts);
        let (x, y) = (
            inst.stated_pre.as_ref().unwrap(),
            inst.stated_post.as_ref().unwrap(),
        );
        let gamma = inst.game.profit("a", y, Some(&inst.shock)).unwrap()
            / inst.game.profit("a", x, None).unwrap();
        out.require(report.passed, format!("two firms k={k} gamma {gamma:.6}"));
        gammas.push(gamma);
    }
    out.require(
        gammas.windows(2).all(|w| w[0] > w[1]) && gammas.iter().all(|g| *g > 0.75),
        "decreasing, above 3/4".into(),
    );
    out.require(
        (gammas[2] - 0.75).abs() <= 2e-3,
        "k=1000 within 2e-3 of 3/4".into(),
    );
    out
}

fn criterion_6(report: &cournot_core::CertificateReport, seconds: f64) -> Outcome {
    let mut out = Outcome::new();
    for name in [
        names::MULTI_START,
        names::PRICE_MONOTONICITY,
        names::QUANTITY_MONOTONICITY,
        names::VARIATIONAL_INEQUALITY,
        names::SURPLUS_FLOOR,
        names::PROFIT_BOUND,
        names::SURPLUS_BOUND,
    ] {
        let c = report.check(name).expect("registered check");
        out.require(
            c.violations == 0 && c.evaluated == report.converged,
            format!(
                "{name}: {} evaluated, {} violations, worst slack {:.1e}",
                c.evaluated,
                c.violations,
                c.worst_slack.unwrap_or(f64::NAN)
            ),
        );
    }
    out.require(
        report.convergence_rate >= 0.99,
        format!("convergence {}/{}", report.converged, report.trials),
    );
    out.require(seconds < 60.0, format!("{seconds:.1}s"));
    out
}

fn criterion_7(report: &cournot_core::CertificateReport) -> Outcome {
    let mut out = Outcome::new();
    let opts = SolveOptions::default();
    for name in [
        names::DUALITY_PROFIT,
        names::DUALITY_WELFARE,
        names::DUALITY_SURPLUS,
    ] {
        let c = report.check(name).expect("registered check");
        out.require(
            c.violations == 0 && c.evaluated > 0,
            format!(
                "{name}: {} evaluated, worst |product − 1| {:.1e}",
                c.evaluated,
                c.worst.unwrap_or(f64::NAN)
            ),
        );
    }
    let inst = bulow_example();
    match negative_shock_ratio(&inst.game, &inst.shock, Objective::Profit, &opts) {
        Ok(v) => out.require(
            (v - 3750.0 / 3721.5).abs() <= 1e-9 && (v - 1.00766).abs() < 5e-6,
            format!("bulow reversed {v:.6}"),
        ),
        Err(e) => out.error("bulow reversed", e),
    }
    let inst = profit_worstcase(1000).unwrap();
    match negative_shock_ratio(&inst.game, &inst.shock, Objective::Profit, &opts) {
        Ok(v) => out.require(
            (v - 4.0 / 3.0).abs() <= 1e-3,
            format!("n=1000 reversed {v:.6}"),
        ),
        Err(e) => out.error("n=1000 reversed", e),
    }
    out
}

fn criterion_8(trials: usize) -> Outcome {
    let mut out = Outcome::new();
    let cfg = RandomGameConfig::default();
    let opts = SolveOptions::default();
    let (mut worst_profile, mut worst_gamma, mut compared) = (0.0_f64, 0.0_f64, 0usize);
    for trial in 0..trials {
        let s = trial_seed(SWEEP_SEED, trial);
        let game = random_game(s, &cfg).unwrap();
        let shock = random_shock(s, &game, &cfg).unwrap();
        let Ok(base) = shock_report(&game, &shock, &opts) else {
            continue;
        };
        for alpha in [0.01, 7.0, 1000.0] {
            let scaled = game.scaled(alpha).unwrap();
            let scaled_shock =
                PriceShock::new(shock.iter().map(|(m, d)| (m.clone(), d * alpha))).unwrap();
            match shock_report(&scaled, &scaled_shock, &opts) {
                Ok(r) => {
                    worst_profile = worst_profile
                        .max(r.pre.profile.sup_distance(&base.pre.profile))
                        .max(r.post.profile.sup_distance(&base.post.profile));
                    for obj in Objective::ALL {
                        let (a, b) = (r.gamma(obj), base.gamma(obj));
                        let d = if a == b {
                            0.0
                        } else {
                            (a.as_f64() - b.as_f64()).abs()
                        };
                        worst_gamma = worst_gamma.max(if d.is_nan() { f64::INFINITY } else { d });
                    }
                    compared += 1;
                }
                Err(e) => out.error(&format!("trial {trial} alpha {alpha}"), e),
            }
        }
    }
    out.require(
        worst_profile <= 1e-7,
        format!("{compared} scaled solves, profile diff {worst_profile:.1e}"),
    );
    out.require(worst_gamma <= 1e-8, format!("gamma diff {worst_gamma:.1e}"));
    out
}

fn main() -> ExitCode {
    let started = Instant::now();
    let suite = certify_suite(
        SWEEP_SEED,
        SWEEP_TRIALS,
        &RandomGameConfig::default(),
        &SolveOptions::default(),
    );
    let suite_seconds = started.elapsed().as_secs_f64();

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "two-market example reproduction", criterion_1()),
        (2, "profit bound tightness", criterion_2()),
        (3, "welfare worst case", criterion_3()),
    ];
    match &suite {
        Ok(report) => {
            results.push((
                4,
                "surplus ratio",
                criterion_4(report.extremes.min_gamma_surplus),
            ));
            results.push((5, "concave counterexamples", criterion_5()));
            results.push((
                6,
                "structural checks on random games",
                criterion_6(report, suite_seconds),
            ));
            results.push((7, "negative-shock duality", criterion_7(report)));
        }
        Err(e) => {
            for (k, name) in [
                (4, "surplus ratio"),
                (6, "structural checks on random games"),
                (7, "negative-shock duality"),
            ] {
                let mut o = Outcome::new();
                o.error("suite", e);
                results.push((k, name, o));
            }
            results.push((5, "concave counterexamples", criterion_5()));
        }
    }
    results.push((8, "scaling invariance", criterion_8(SWEEP_TRIALS)));
    results.sort_by_key(|r| r.0);

    let mut all = true;
    for (k, name, outcome) in &results {
        all &= outcome.passed;
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {k} [{name}]: {status} ({})",
            outcome.notes.join("; ")
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
