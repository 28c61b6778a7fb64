//! Executable checks of the structural properties of equilibria under positive shocks,
//! for single games, for the named constructions and over seeded random sweeps.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    report_from_equilibria, shock_report, surplus_bound, take_back_shock, Objective, Ratio,
    ShockReport,
};
use crate::error::{Error, Result};
use crate::instances::{random_game, random_shock, NamedInstance, RandomGameConfig};
use crate::model::{Game, PriceShock, QuantityProfile};
use crate::solver::{kkt_residual, solve_equilibrium, Method, SolveOptions};

/// Residual above which a profile is not accepted as an equilibrium by the checks.
pub const CERTIFY_KKT_TOL: f64 = 1e-8;
/// Allowed violation of the monotonicity, variational-inequality and surplus-floor checks.
pub const STRUCTURAL_TOL: f64 = 1e-8;
/// Allowed relative deviation of the product of a ratio and its negative-shock ratio from 1.
pub const DUALITY_TOL: f64 = 1e-8;
/// Allowed residual at the stated profiles of a named instance, and allowed deviation of
/// ratios evaluated there from the closed form.
pub const STATED_TOL: f64 = 1e-9;
/// Allowed distance between solver output and stated profiles, and the relative
/// deviation of solved ratios from the closed form.
pub const SOLVED_TOL: f64 = 1e-7;

fn certified(game: &Game, profile: &QuantityProfile, shock: Option<&PriceShock>) -> Result<()> {
    let residual = kkt_residual(game, profile, shock)?;
    if residual <= CERTIFY_KKT_TOL {
        Ok(())
    } else {
        Err(Error::NotCertified {
            residual,
            tol: CERTIFY_KKT_TOL,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicitySlack {
    /// `min_m p_m^δ(y_m) − p_m(x_m)`.
    pub price: f64,
    /// `min_i y_i − x_i`.
    pub quantity: f64,
}

/// Prices and firm totals can only go up from `x` (equilibrium of `game`) to `y`
/// (equilibrium of `game` shifted by `shock`). Returns the smallest increases.
pub fn check_monotonicity(
    game: &Game,
    shock: &PriceShock,
    x: &QuantityProfile,
    y: &QuantityProfile,
) -> Result<MonotonicitySlack> {
    certified(game, x, None)?;
    certified(game, y, Some(shock))?;
    let mut price = f64::INFINITY;
    for market in game.markets() {
        let id = market.id().as_str();
        let before = game.price(id, x.market_total(id), None)?;
        let after = game.price(id, y.market_total(id), Some(shock))?;
        price = price.min(after - before);
    }
    let quantity = game
        .firms()
        .iter()
        .map(|f| y.firm_total(f.id().as_str()) - x.firm_total(f.id().as_str()))
        .fold(f64::INFINITY, f64::min);
    Ok(MonotonicitySlack { price, quantity })
}

/// `max_i Σ_m (π^δ_{i,m}(y) − c_i′(y_i))·(x_{i,m} − y_{i,m})`, which is at most zero
/// when `y` is the equilibrium of the shifted game and `x` is any feasible profile.
pub fn check_variational_inequality(
    game: &Game,
    shock: &PriceShock,
    x: &QuantityProfile,
    y: &QuantityProfile,
) -> Result<f64> {
    game.require_affine()?;
    certified(game, x, None)?;
    certified(game, y, Some(shock))?;
    let mut worst = f64::NEG_INFINITY;
    for f in game.firms() {
        let id = f.id().as_str();
        let mc = f.marginal_cost(y.firm_total(id))?;
        let mut sum = 0.0;
        for m in f.markets() {
            let mr = game.marginal_revenue(id, m.as_str(), y, Some(shock))?;
            sum += (mr - mc) * (x.get(id, m.as_str()) - y.get(id, m.as_str()));
        }
        worst = worst.max(sum);
    }
    Ok(worst)
}

/// `S(x) − Σ_{i,m} (3/2)·r_m·x_{i,m}²` at the equilibrium `x` of the unshocked game.
pub fn check_surplus_floor(game: &Game, x: &QuantityProfile) -> Result<f64> {
    game.require_affine()?;
    certified(game, x, None)?;
    let mut floor = 0.0;
    for (_, market, q) in x.iter() {
        let (_, r) = game
            .market(market.as_str())?
            .affine_coefficients()
            .expect("affine game");
        floor += 1.5 * r * q * q;
    }
    Ok(game.surplus(x, None)? - floor)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// Observed values must be at least the threshold.
    AtLeast,
    /// Observed values must be at most the threshold.
    AtMost,
}

/// Aggregate outcome of one check across everything it was evaluated on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub bound: Bound,
    pub threshold: f64,
    /// Observed value closest to (or furthest past) the threshold.
    pub worst: Option<f64>,
    /// `worst − threshold` for lower bounds, `threshold − worst` for upper bounds.
    pub worst_slack: Option<f64>,
    pub evaluated: usize,
    pub violations: usize,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, bound: Bound, threshold: f64) -> Self {
        CheckOutcome {
            name: name.to_owned(),
            bound,
            threshold,
            worst: None,
            worst_slack: None,
            evaluated: 0,
            violations: 0,
            passed: true,
        }
    }

    fn slack(&self, value: f64) -> f64 {
        match self.bound {
            Bound::AtLeast => value - self.threshold,
            Bound::AtMost => self.threshold - value,
        }
    }

    /// Records `value`; returns its slack (negative or NaN means violated).
    fn record(&mut self, value: f64) -> f64 {
        let slack = self.slack(value);
        self.evaluated += 1;
        if slack.is_nan() || slack < 0.0 {
            self.violations += 1;
            self.passed = false;
        }
        if self.worst_slack.is_none_or(|w| slack.is_nan() || slack < w) {
            self.worst_slack = Some(slack);
            self.worst = Some(value);
        }
        slack
    }
}

/// A failed check together with what is needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub check: String,
    pub value: f64,
    pub slack: f64,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub game: Option<Game>,
    pub shock: Option<PriceShock>,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub trial: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub min_gamma_u: Option<f64>,
    pub min_gamma_u_slack: Option<f64>,
    pub min_gamma_welfare: Option<f64>,
    pub min_gamma_surplus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub subject: String,
    pub seed: Option<u64>,
    pub config_digest: Option<String>,
    pub trials: usize,
    pub converged: usize,
    pub non_converged: usize,
    pub convergence_rate: f64,
    /// Converged trials in which no firm lost profit.
    pub all_gain: usize,
    pub extremes: Extremes,
    pub checks: Vec<CheckOutcome>,
    pub failures: Vec<Failure>,
    pub skipped: Vec<Skipped>,
    pub passed: bool,
}

impl CertificateReport {
    fn new(subject: impl Into<String>, checks: Vec<CheckOutcome>) -> Self {
        CertificateReport {
            subject: subject.into(),
            seed: None,
            config_digest: None,
            trials: 0,
            converged: 0,
            non_converged: 0,
            convergence_rate: 1.0,
            all_gain: 0,
            extremes: Extremes::default(),
            checks,
            failures: Vec::new(),
            skipped: Vec::new(),
            passed: true,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn check_mut(&mut self, name: &str) -> &mut CheckOutcome {
        self.checks
            .iter_mut()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("unregistered check `{name}`"))
    }

    fn finish(&mut self) {
        self.passed = self.checks.iter().all(|c| c.passed) && self.failures.is_empty();
        self.convergence_rate = if self.trials == 0 {
            1.0
        } else {
            self.converged as f64 / self.trials as f64
        };
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Check names used by [`certify_game`] and [`certify_suite`].
pub mod names {
    pub const MULTI_START: &str = "multi-start";
    pub const PRICE_MONOTONICITY: &str = "price-monotonicity";
    pub const QUANTITY_MONOTONICITY: &str = "quantity-monotonicity";
    pub const VARIATIONAL_INEQUALITY: &str = "variational-inequality";
    pub const SURPLUS_FLOOR: &str = "surplus-floor";
    pub const DUALITY_PROFIT: &str = "duality-u";
    pub const DUALITY_WELFARE: &str = "duality-U";
    pub const DUALITY_SURPLUS: &str = "duality-S";
    pub const PROFIT_BOUND: &str = "profit-bound";
    pub const WELFARE_BOUND: &str = "welfare-bound";
    pub const SURPLUS_BOUND: &str = "surplus-bound";
    pub const WELFARE_DOMINATES: &str = "welfare-dominates-profit";
}

fn suite_checks(opts: &SolveOptions) -> Vec<CheckOutcome> {
    use names::*;
    vec![
        CheckOutcome::new(MULTI_START, Bound::AtMost, 10.0 * opts.tol),
        CheckOutcome::new(PRICE_MONOTONICITY, Bound::AtLeast, -STRUCTURAL_TOL),
        CheckOutcome::new(QUANTITY_MONOTONICITY, Bound::AtLeast, -STRUCTURAL_TOL),
        CheckOutcome::new(VARIATIONAL_INEQUALITY, Bound::AtMost, STRUCTURAL_TOL),
        CheckOutcome::new(SURPLUS_FLOOR, Bound::AtLeast, -STRUCTURAL_TOL),
        CheckOutcome::new(DUALITY_PROFIT, Bound::AtMost, DUALITY_TOL),
        CheckOutcome::new(DUALITY_WELFARE, Bound::AtMost, DUALITY_TOL),
        CheckOutcome::new(DUALITY_SURPLUS, Bound::AtMost, DUALITY_TOL),
        // The thresholds of the bound checks depend on n; values are recorded as slacks.
        CheckOutcome::new(PROFIT_BOUND, Bound::AtLeast, -crate::analysis::BOUND_EPS),
        CheckOutcome::new(
            WELFARE_BOUND,
            Bound::AtLeast,
            0.75 - crate::analysis::BOUND_EPS,
        ),
        CheckOutcome::new(
            SURPLUS_BOUND,
            Bound::AtLeast,
            surplus_bound() - crate::analysis::BOUND_EPS,
        ),
        CheckOutcome::new(WELFARE_DOMINATES, Bound::AtLeast, -1e-12),
    ]
}

/// A feasible profile with random entries, used as an alternative solver start.
pub fn random_start(game: &Game, seed: u64) -> QuantityProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout: Vec<Vec<f64>> = game
        .firms()
        .iter()
        .map(|f| {
            let mut row: Vec<f64> = f
                .markets()
                .iter()
                .map(|m| {
                    let (p, r) = game
                        .market(m.as_str())
                        .ok()
                        .and_then(|mk| mk.affine_coefficients())
                        .unwrap_or((1.0, 1.0));
                    let reach = if r > 0.0 { p / r } else { p.max(1.0) };
                    rng.gen_range(0.0..=reach.max(0.0))
                })
                .collect();
            if let Some(cap) = f.cap() {
                let total: f64 = row.iter().sum();
                if total > cap {
                    row.iter_mut().for_each(|q| *q *= cap / total);
                }
            }
            row
        })
        .collect();
    QuantityProfile::from_layout(game, &layout)
}

/// Outcome of running every suite check on one game and shock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// `(check, observed value)` for every check that applied.
    pub values: Vec<(String, f64)>,
    pub report: ShockReport,
}

/// Runs the suite checks on `game` and `shock`; `start_seed` drives the second start
/// of the multi-start check. Non-convergence is returned as an error.
pub fn certify_game(
    game: &Game,
    shock: &PriceShock,
    opts: &SolveOptions,
    start_seed: u64,
) -> Result<TrialOutcome> {
    use names::*;
    let pre = solve_equilibrium(game, None, opts)?;
    let post = solve_equilibrium(game, Some(shock), opts)?;
    let x = pre.profile.clone();
    let y = post.profile.clone();
    let report = report_from_equilibria(game, shock, pre, post)?;
    let mut values = Vec::new();

    // A different start and the other iteration scheme must reach the same point.
    let other = SolveOptions {
        initial: Some(random_start(game, start_seed)),
        method: match opts.method {
            Method::Aggregate => Method::RoundRobin,
            Method::RoundRobin => Method::Aggregate,
        },
        ..opts.clone()
    };
    let again = solve_equilibrium(game, Some(shock), &other)?;
    values.push((MULTI_START.to_owned(), again.profile.sup_distance(&y)));

    let mono = check_monotonicity(game, shock, &x, &y)?;
    values.push((PRICE_MONOTONICITY.to_owned(), mono.price));
    values.push((QUANTITY_MONOTONICITY.to_owned(), mono.quantity));
    values.push((
        VARIATIONAL_INEQUALITY.to_owned(),
        check_variational_inequality(game, shock, &x, &y)?,
    ));
    values.push((SURPLUS_FLOOR.to_owned(), check_surplus_floor(game, &x)?));

    let taken_back = take_back_shock(game, shock, opts)?;
    for (objective, name) in [
        (Objective::Profit, DUALITY_PROFIT),
        (Objective::Welfare, DUALITY_WELFARE),
        (Objective::Surplus, DUALITY_SURPLUS),
    ] {
        // Zero baselines have no reciprocal; the duality check does not apply there.
        if let Ratio::Value(gamma) = report.gamma(objective) {
            if gamma != 0.0 {
                let back = taken_back.ratio(objective)?;
                values.push((name.to_owned(), (gamma * back - 1.0).abs()));
            }
        }
    }

    values.push((
        PROFIT_BOUND.to_owned(),
        report.gamma_u.as_f64() - report.bound_profit,
    ));
    values.push((WELFARE_BOUND.to_owned(), report.gamma_welfare.as_f64()));
    values.push((SURPLUS_BOUND.to_owned(), report.gamma_surplus.as_f64()));
    values.push((
        WELFARE_DOMINATES.to_owned(),
        report.gamma_welfare.as_f64() - report.gamma_u.as_f64(),
    ));
    Ok(TrialOutcome { values, report })
}

/// Seed of trial `trial` of a suite started from `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Generates the game and shock of one suite trial and runs [`certify_game`] on it.
pub fn certify_trial(
    seed: u64,
    trial: usize,
    cfg: &RandomGameConfig,
    opts: &SolveOptions,
) -> Result<(Game, PriceShock, Result<TrialOutcome>)> {
    let s = trial_seed(seed, trial);
    let game = random_game(s, cfg)?;
    let shock = random_shock(s, &game, cfg)?;
    let outcome = certify_game(&game, &shock, opts, s.rotate_left(17));
    Ok((game, shock, outcome))
}

/// Runs `trials` seeded random games with random nonnegative shocks through every check.
pub fn certify_suite(
    seed: u64,
    trials: usize,
    cfg: &RandomGameConfig,
    opts: &SolveOptions,
) -> Result<CertificateReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    cfg.validate()?;
    opts.validate()?;
    let mut report = CertificateReport::new("random-suite", suite_checks(opts));
    report.seed = Some(seed);
    report.config_digest = Some(cfg.digest());
    report.trials = trials;

    for trial in 0..trials {
        let (game, shock, outcome) = certify_trial(seed, trial, cfg, opts)?;
        let outcome = match outcome {
            Ok(o) => o,
            Err(e @ Error::NonConvergence { .. }) => {
                report.non_converged += 1;
                report.skipped.push(Skipped {
                    trial,
                    seed: trial_seed(seed, trial),
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => {
                report.failures.push(Failure {
                    check: "solve".into(),
                    value: f64::NAN,
                    slack: f64::NAN,
                    trial: Some(trial),
                    seed: Some(trial_seed(seed, trial)),
                    game: Some(game),
                    shock: Some(shock),
                    detail: Some(e.to_string()),
                });
                continue;
            }
        };
        report.converged += 1;
        if outcome.report.all_gain {
            report.all_gain += 1;
        }
        let r = &outcome.report;
        let ex = &mut report.extremes;
        let fmin = |cur: Option<f64>, v: f64| Some(cur.map_or(v, |c: f64| c.min(v)));
        ex.min_gamma_u = fmin(ex.min_gamma_u, r.gamma_u.as_f64());
        ex.min_gamma_u_slack = fmin(ex.min_gamma_u_slack, r.gamma_u.as_f64() - r.bound_profit);
        ex.min_gamma_welfare = fmin(ex.min_gamma_welfare, r.gamma_welfare.as_f64());
        ex.min_gamma_surplus = fmin(ex.min_gamma_surplus, r.gamma_surplus.as_f64());

        for (name, value) in &outcome.values {
            let slack = report.check_mut(name).record(*value);
            if slack.is_nan() || slack < 0.0 {
                report.failures.push(Failure {
                    check: name.clone(),
                    value: *value,
                    slack,
                    trial: Some(trial),
                    seed: Some(trial_seed(seed, trial)),
                    game: Some(game.clone()),
                    shock: Some(shock.clone()),
                    detail: None,
                });
            }
        }
    }
    report.finish();
    Ok(report)
}

/// Checks a named construction: the stated profiles satisfy the KKT conditions, the
/// ratios evaluated at them match the closed form, and for affine games the solver
/// reproduces both profiles and ratios.
pub fn verify_named_instance(inst: &NamedInstance, opts: &SolveOptions) -> CertificateReport {
    let mut checks = vec![
        CheckOutcome::new("stated-pre-kkt", Bound::AtMost, STATED_TOL),
        CheckOutcome::new("stated-post-kkt", Bound::AtMost, STATED_TOL),
    ];
    for e in &inst.expected {
        checks.push(CheckOutcome::new(
            &format!("stated-gamma-{}", e.objective.symbol()),
            Bound::AtMost,
            STATED_TOL,
        ));
    }
    let affine = inst.game.is_affine();
    if affine {
        checks.push(CheckOutcome::new(
            "solved-pre-distance",
            Bound::AtMost,
            SOLVED_TOL,
        ));
        checks.push(CheckOutcome::new(
            "solved-post-distance",
            Bound::AtMost,
            SOLVED_TOL,
        ));
        for e in &inst.expected {
            checks.push(CheckOutcome::new(
                &format!("solved-gamma-{}", e.objective.symbol()),
                Bound::AtMost,
                SOLVED_TOL,
            ));
        }
    }
    let mut report = CertificateReport::new(inst.name.clone(), checks);
    report.trials = 1;

    let fail = |report: &mut CertificateReport, check: &str, e: Error| {
        report.failures.push(Failure {
            check: check.to_owned(),
            value: f64::NAN,
            slack: f64::NAN,
            trial: None,
            seed: None,
            game: None,
            shock: None,
            detail: Some(e.to_string()),
        });
    };
    let observe = |report: &mut CertificateReport, check: &str, value: f64| {
        let slack = report.check_mut(check).record(value);
        if slack.is_nan() || slack < 0.0 {
            report.failures.push(Failure {
                check: check.to_owned(),
                value,
                slack,
                trial: None,
                seed: None,
                game: None,
                shock: None,
                detail: None,
            });
        }
    };
    let rel = |value: f64, expected: f64| (value - expected).abs() / expected.abs().max(1.0);

    let game = &inst.game;
    let shock = &inst.shock;
    if let (Some(x), Some(y)) = (&inst.stated_pre, &inst.stated_post) {
        match kkt_residual(game, x, None) {
            Ok(v) => observe(&mut report, "stated-pre-kkt", v),
            Err(e) => fail(&mut report, "stated-pre-kkt", e),
        }
        match kkt_residual(game, y, Some(shock)) {
            Ok(v) => observe(&mut report, "stated-post-kkt", v),
            Err(e) => fail(&mut report, "stated-post-kkt", e),
        }
        for e in &inst.expected {
            let name = format!("stated-gamma-{}", e.objective.symbol());
            match crate::analysis::ratio_at_profiles(game, shock, x, y, e.objective) {
                Ok(r) => observe(&mut report, &name, rel(r.as_f64(), e.value)),
                Err(err) => fail(&mut report, &name, err),
            }
        }
    }

    if affine {
        match shock_report(game, shock, opts) {
            Ok(r) => {
                report.converged = 1;
                if let Some(x) = &inst.stated_pre {
                    observe(
                        &mut report,
                        "solved-pre-distance",
                        r.pre.profile.sup_distance(x),
                    );
                }
                if let Some(y) = &inst.stated_post {
                    observe(
                        &mut report,
                        "solved-post-distance",
                        r.post.profile.sup_distance(y),
                    );
                }
                for e in &inst.expected {
                    let name = format!("solved-gamma-{}", e.objective.symbol());
                    observe(
                        &mut report,
                        &name,
                        rel(r.gamma(e.objective).as_f64(), e.value),
                    );
                }
                report.all_gain = usize::from(r.all_gain);
                report.extremes = Extremes {
                    min_gamma_u: Some(r.gamma_u.as_f64()),
                    min_gamma_u_slack: Some(r.gamma_u.as_f64() - r.bound_profit),
                    min_gamma_welfare: Some(r.gamma_welfare.as_f64()),
                    min_gamma_surplus: Some(r.gamma_surplus.as_f64()),
                };
            }
            Err(e) => {
                report.non_converged = usize::from(matches!(e, Error::NonConvergence { .. }));
                fail(&mut report, "solve", e);
            }
        }
    } else {
        report.converged = 1;
    }
    report.finish();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{
        bulow_example, concave_small_shock, concave_two_firm, profit_worstcase, welfare_worstcase,
    };

    fn profiles(inst: &NamedInstance) -> (&QuantityProfile, &QuantityProfile) {
        (
            inst.stated_pre.as_ref().unwrap(),
            inst.stated_post.as_ref().unwrap(),
        )
    }

    #[test]
    fn bulow_monotonicity() {
        let inst = bulow_example();
        let (x, y) = profiles(&inst);
        let s = check_monotonicity(&inst.game, &inst.shock, x, y).unwrap();
        // Market 2 goes from 100 to 102, market 1 from 50 to 55; firm b grows by 1, a by 5.
        assert_eq!(s.price, 2.0);
        assert_eq!(s.quantity, 1.0);
    }

    #[test]
    fn zero_shock_has_zero_slack() {
        let inst = bulow_example();
        let (x, _) = profiles(&inst);
        let zero = PriceShock::zero();
        let s = check_monotonicity(&inst.game, &zero, x, x).unwrap();
        assert_eq!((s.price, s.quantity), (0.0, 0.0));
        assert_eq!(
            check_variational_inequality(&inst.game, &zero, x, x).unwrap(),
            0.0
        );
    }

    #[test]
    fn profit_worstcase_monotonicity() {
        let inst = profit_worstcase(2).unwrap();
        let (x, y) = profiles(&inst);
        let s = check_monotonicity(&inst.game, &inst.shock, x, y).unwrap();
        assert!(s.quantity.abs() < 1e-15);
        assert!((y.firm_total("b1") - x.firm_total("b1") - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn variational_inequality_signs() {
        for inst in [bulow_example(), welfare_worstcase(2).unwrap()] {
            let (x, y) = profiles(&inst);
            assert!(check_variational_inequality(&inst.game, &inst.shock, x, y).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn surplus_floor_values() {
        let inst = welfare_worstcase(2).unwrap();
        let (x, _) = profiles(&inst);
        assert!(check_surplus_floor(&inst.game, x).unwrap().abs() < 1e-15);
        let inst = bulow_example();
        let (x, _) = profiles(&inst);
        assert_eq!(check_surplus_floor(&inst.game, x).unwrap(), 5000.0);
        let zero = QuantityProfile::zeros(&inst.game);
        assert!(check_surplus_floor(&inst.game, &zero).is_err());
    }

    #[test]
    fn uncertified_profiles_are_rejected() {
        let inst = bulow_example();
        let (x, y) = profiles(&inst);
        assert!(matches!(
            check_monotonicity(&inst.game, &inst.shock, y, x),
            Err(Error::NotCertified { .. })
        ));
    }

    #[test]
    fn named_instances_verify() {
        let opts = SolveOptions::default();
        for inst in [
            bulow_example(),
            profit_worstcase(10).unwrap(),
            welfare_worstcase(3).unwrap(),
            concave_small_shock(8).unwrap(),
            concave_two_firm(10).unwrap(),
        ] {
            let r = verify_named_instance(&inst, &opts);
            assert!(r.passed, "{}", r.to_json());
        }
    }

    #[test]
    fn tampered_instance_fails_without_panicking() {
        let mut inst = bulow_example();
        inst.expected[0].value = 0.5;
        let r = verify_named_instance(&inst, &SolveOptions::default());
        assert!(!r.passed);
        assert!(r.failures.iter().any(|f| f.check == "stated-gamma-u"));
    }

    #[test]
    fn small_suite_passes_and_is_reproducible() {
        let cfg = RandomGameConfig::default();
        let opts = SolveOptions::default();
        let a = certify_suite(7, 40, &cfg, &opts).unwrap();
        assert!(a.passed, "{}", a.to_json());
        assert_eq!(a.converged + a.non_converged, 40);
        let b = certify_suite(7, 40, &cfg, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_firm_suite_never_loses() {
        let cfg = RandomGameConfig {
            n_max: 1,
            ..Default::default()
        };
        let r = certify_suite(3, 30, &cfg, &SolveOptions::default()).unwrap();
        assert!(r.passed);
        assert!(r.extremes.min_gamma_u.unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn replay_reproduces_values() {
        let cfg = RandomGameConfig::default();
        let opts = SolveOptions::default();
        let (game, shock, outcome) = certify_trial(11, 5, &cfg, &opts).unwrap();
        let first = outcome.unwrap();
        let replayed = Game::from_json(&game.to_json()).unwrap();
        let shock2: PriceShock = serde_json::from_str(&shock.to_json()).unwrap();
        let s = trial_seed(11, 5).rotate_left(17);
        let second = certify_game(&replayed, &shock2, &opts, s).unwrap();
        assert_eq!(first.values, second.values);
    }
}
