//! Profit, welfare and surplus ratios between the equilibria before and after a shock.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{FirmId, Game, PriceShock, QuantityProfile};
use crate::solver::{solve_equilibrium, EquilibriumResult, SolveOptions};

/// Slack on the bound checks of a report.
pub const BOUND_EPS: f64 = 1e-6;
/// A baseline value is treated as zero below this fraction of the values involved.
pub const ZERO_BASELINE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Smallest ratio of individual firm profits.
    Profit,
    /// Total profit.
    Welfare,
    /// Social surplus.
    Surplus,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Profit, Objective::Welfare, Objective::Surplus];

    pub fn symbol(self) -> &'static str {
        match self {
            Objective::Profit => "u",
            Objective::Welfare => "U",
            Objective::Surplus => "S",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Profit => "profit",
            Objective::Welfare => "welfare",
            Objective::Surplus => "surplus",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" | "profit" => Ok(Objective::Profit),
            "U" | "welfare" => Ok(Objective::Welfare),
            "S" | "surplus" => Ok(Objective::Surplus),
            _ => Err(Error::InvalidArgument(format!("unknown objective `{s}`"))),
        }
    }
}

/// Post-shock value over pre-shock value, with the zero-baseline cases kept apart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ratio {
    Value(f64),
    /// Baseline zero and post-shock value nonnegative; counts as 1.
    ZeroBaselineNonneg,
    /// Baseline zero and post-shock value negative; counts as −∞.
    ZeroBaselineNegative,
}

const NONNEG: &str = "zero-baseline-nonneg";
const NEGATIVE: &str = "zero-baseline-negative";

impl Ratio {
    pub fn between(pre: f64, post: f64, scale: f64) -> Ratio {
        let tiny = ZERO_BASELINE_TOL * scale;
        if pre.abs() <= tiny {
            if post < -tiny {
                Ratio::ZeroBaselineNegative
            } else {
                Ratio::ZeroBaselineNonneg
            }
        } else {
            Ratio::Value(post / pre)
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Ratio::Value(v) => v,
            Ratio::ZeroBaselineNonneg => 1.0,
            Ratio::ZeroBaselineNegative => f64::NEG_INFINITY,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Value(v) => write!(f, "{v}"),
            Ratio::ZeroBaselineNonneg => f.write_str(NONNEG),
            Ratio::ZeroBaselineNegative => f.write_str(NEGATIVE),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ratio::Value(v) => s.serialize_f64(*v),
            Ratio::ZeroBaselineNonneg => s.serialize_str(NONNEG),
            Ratio::ZeroBaselineNegative => s.serialize_str(NEGATIVE),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Status(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Ratio::Value(v)),
            Raw::Status(s) if s == NONNEG => Ok(Ratio::ZeroBaselineNonneg),
            Raw::Status(s) if s == NEGATIVE => Ok(Ratio::ZeroBaselineNegative),
            Raw::Status(s) => Err(serde::de::Error::custom(format!(
                "unknown ratio status `{s}`"
            ))),
        }
    }
}

/// Ratios of matching entries with a common scale; returns the index and ratio of the
/// smallest (or largest) one. Exact ties prefer a numeric ratio over a status.
fn extreme_ratio(pre: &[f64], post: &[f64], largest: bool) -> (usize, Ratio) {
    let scale: f64 = pre.iter().chain(post).map(|v| v.abs()).sum();
    let mut best: Option<(usize, Ratio)> = None;
    for (k, (&a, &b)) in pre.iter().zip(post).enumerate() {
        let r = Ratio::between(a, b, scale);
        let better = match best {
            None => true,
            Some((_, cur)) => {
                let (x, y) = (r.as_f64(), cur.as_f64());
                let strictly = if largest { x > y } else { x < y };
                strictly || (x == y && cur.value().is_none() && r.value().is_some())
            }
        };
        if better {
            best = Some((k, r));
        }
    }
    best.expect("at least one value")
}

fn objective_values(
    game: &Game,
    profile: &QuantityProfile,
    shock: Option<&PriceShock>,
    obj: Objective,
) -> Result<Vec<f64>> {
    match obj {
        Objective::Profit => game.profits(profile, shock),
        Objective::Welfare => Ok(vec![game.welfare(profile, shock)?]),
        Objective::Surplus => Ok(vec![game.surplus(profile, shock)?]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundChecks {
    pub epsilon: f64,
    /// `γ^u ≥ profit_bound(n) − ε`.
    pub profit: bool,
    /// `γ^U ≥ 3/4 − ε`.
    pub welfare: bool,
    /// `γ^S ≥ 5/6 − ε`.
    pub surplus: bool,
}

impl BoundChecks {
    pub fn all(&self) -> bool {
        self.profit && self.welfare && self.surplus
    }
}

/// Both equilibria of a shocked game and the ratios between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockReport {
    pub game_digest: String,
    pub n_firms: usize,
    pub shock: PriceShock,
    pub pre: EquilibriumResult,
    pub post: EquilibriumResult,
    pub profits_pre: IndexMap<FirmId, f64>,
    pub profits_post: IndexMap<FirmId, f64>,
    pub profit_ratios: IndexMap<FirmId, Ratio>,
    pub welfare_pre: f64,
    pub welfare_post: f64,
    pub surplus_pre: f64,
    pub surplus_post: f64,
    pub gamma_u: Ratio,
    /// Firm attaining `gamma_u`.
    pub worst_firm: FirmId,
    #[serde(rename = "gamma_U")]
    pub gamma_welfare: Ratio,
    #[serde(rename = "gamma_S")]
    pub gamma_surplus: Ratio,
    pub bound_profit: f64,
    pub bounds: BoundChecks,
    /// No firm loses; such games satisfy the profit bound trivially.
    pub all_gain: bool,
}

impl ShockReport {
    pub fn gamma(&self, objective: Objective) -> Ratio {
        match objective {
            Objective::Profit => self.gamma_u,
            Objective::Welfare => self.gamma_welfare,
            Objective::Surplus => self.gamma_surplus,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Solves `game` with and without `shock` and compares the equilibria.
pub fn shock_report(game: &Game, shock: &PriceShock, opts: &SolveOptions) -> Result<ShockReport> {
    if !shock.is_positive() {
        return Err(Error::InvalidArgument(
            "shock reports take nonnegative shocks; use the negative-shock ratio instead".into(),
        ));
    }
    let pre = solve_equilibrium(game, None, opts)?;
    let post = solve_equilibrium(game, Some(shock), opts)?;
    report_from_equilibria(game, shock, pre, post)
}

/// Builds a report from already computed equilibria of `game` and `game` shifted by `shock`.
pub fn report_from_equilibria(
    game: &Game,
    shock: &PriceShock,
    pre: EquilibriumResult,
    post: EquilibriumResult,
) -> Result<ShockReport> {
    let n = game.n_firms();
    let before = game.profits(&pre.profile, None)?;
    let after = game.profits(&post.profile, Some(shock))?;
    let (worst, gamma_u) = extreme_ratio(&before, &after, false);
    let scale: f64 = before.iter().chain(&after).map(|v| v.abs()).sum();
    let ids = game.firms().iter().map(|f| f.id().clone());
    let profit_ratios: IndexMap<FirmId, Ratio> = ids
        .clone()
        .zip(before.iter().zip(&after))
        .map(|(id, (&a, &b))| (id, Ratio::between(a, b, scale)))
        .collect();
    let all_gain = profit_ratios.values().all(|r| r.as_f64() >= 1.0);

    let welfare_pre: f64 = before.iter().sum();
    let welfare_post: f64 = after.iter().sum();
    let surplus_pre = game.surplus(&pre.profile, None)?;
    let surplus_post = game.surplus(&post.profile, Some(shock))?;
    let gamma_welfare = extreme_ratio(&[welfare_pre], &[welfare_post], false).1;
    let gamma_surplus = extreme_ratio(&[surplus_pre], &[surplus_post], false).1;

    let bound_profit = profit_bound(n)?;
    let bounds = BoundChecks {
        epsilon: BOUND_EPS,
        profit: gamma_u.as_f64() >= bound_profit - BOUND_EPS,
        welfare: gamma_welfare.as_f64() >= 0.75 - BOUND_EPS,
        surplus: gamma_surplus.as_f64() >= surplus_bound() - BOUND_EPS,
    };

    Ok(ShockReport {
        game_digest: game.digest(),
        n_firms: n,
        shock: shock.clone(),
        profits_pre: ids.clone().zip(before.iter().copied()).collect(),
        profits_post: ids.zip(after.iter().copied()).collect(),
        profit_ratios,
        welfare_pre,
        welfare_post,
        surplus_pre,
        surplus_post,
        gamma_u,
        worst_firm: game.firms()[worst].id().clone(),
        gamma_welfare,
        gamma_surplus,
        bound_profit,
        bounds,
        all_gain,
        pre,
        post,
    })
}

/// The ratio for `objective` between given profiles `x` of `game` and `y` of `game`
/// shifted by `shock`, without solving anything. Works for concave prices except for
/// the surplus.
pub fn ratio_at_profiles(
    game: &Game,
    shock: &PriceShock,
    x: &QuantityProfile,
    y: &QuantityProfile,
    objective: Objective,
) -> Result<Ratio> {
    let before = objective_values(game, x, None, objective)?;
    let after = objective_values(game, y, Some(shock), objective)?;
    Ok(extreme_ratio(&before, &after, false).1)
}

/// `1 − (n−1)²/(4n²)`: no firm keeps less than this share of its profit after a
/// positive shock in an affine game with `n` firms.
pub fn profit_bound(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "the number of firms must be at least 1".into(),
        ));
    }
    let n = n as f64;
    Ok(1.0 - (n - 1.0).powi(2) / (4.0 * n * n))
}

/// `1 − (n−1)²/(4(n²+n−1))`, the welfare ratio of the welfare worst-case family.
pub fn welfare_ratio_formula(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "the number of firms must be at least 1".into(),
        ));
    }
    let n = n as f64;
    Ok(1.0 - (n - 1.0).powi(2) / (4.0 * (n * n + n - 1.0)))
}

/// Surplus ratio of the welfare worst-case family with `n` firms; tends to 5/6.
pub fn surplus_ratio_formula(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "the number of firms must be at least 1".into(),
        ));
    }
    let n = n as f64;
    let d = n * n + n - 1.0;
    let post =
        (10.0 * n.powi(4) + 22.0 * n.powi(3) - 7.0 * n * n - 24.0 * n + 11.0) / (8.0 * d * d);
    Ok(post / 1.5)
}

/// Social surplus keeps at least this share after a positive shock.
pub fn surplus_bound() -> f64 {
    5.0 / 6.0
}

/// Ratio for the negative shock `−δ` applied to `game` shifted by `δ`, computed as the
/// reciprocal of the positive-shock ratio. For profits this is the largest gain of any
/// firm, the reciprocal of the smallest profit ratio.
pub fn negative_shock_ratio(
    game: &Game,
    shock: &PriceShock,
    objective: Objective,
    opts: &SolveOptions,
) -> Result<f64> {
    let report = shock_report(game, shock, opts)?;
    reciprocal(report.gamma(objective))
}

pub(crate) fn reciprocal(ratio: Ratio) -> Result<f64> {
    match ratio {
        Ratio::Value(v) if v != 0.0 && v.is_finite() => Ok(1.0 / v),
        other => Err(Error::DegenerateRatio(format!(
            "positive-shock ratio is {other}"
        ))),
    }
}

/// The same ratio as [`negative_shock_ratio`], obtained by solving the shifted game and
/// then taking the shock back.
pub fn negative_shock_ratio_by_reapplication(
    game: &Game,
    shock: &PriceShock,
    objective: Objective,
    opts: &SolveOptions,
) -> Result<f64> {
    take_back_shock(game, shock, opts)?.ratio(objective)
}

/// Equilibria of `game` shifted by `δ` and of that game shifted back by `−δ`.
#[derive(Clone, Debug)]
pub struct TakenBack {
    pub shifted: Game,
    pub back: PriceShock,
    /// Equilibrium of the shifted game.
    pub y: EquilibriumResult,
    /// Equilibrium after taking the shock back.
    pub x: EquilibriumResult,
}

impl TakenBack {
    /// Post over pre value for the negative shock; for profits, the largest firm ratio.
    pub fn ratio(&self, objective: Objective) -> Result<f64> {
        let before = objective_values(&self.shifted, &self.y.profile, None, objective)?;
        let after = objective_values(&self.shifted, &self.x.profile, Some(&self.back), objective)?;
        match extreme_ratio(&before, &after, true).1 {
            Ratio::Value(v) => Ok(v),
            other => Err(Error::DegenerateRatio(format!(
                "negative-shock ratio is {other}"
            ))),
        }
    }
}

/// Solves `game` shifted by the nonnegative `shock`, then with the shock taken back.
pub fn take_back_shock(game: &Game, shock: &PriceShock, opts: &SolveOptions) -> Result<TakenBack> {
    if !shock.is_positive() {
        return Err(Error::InvalidArgument(
            "expected the nonnegative shock to take back".into(),
        ));
    }
    let shifted = game.apply_shock(shock)?;
    let back = shock.reversed();
    let y = solve_equilibrium(&shifted, None, opts)?;
    let x = solve_equilibrium(&shifted, Some(&back), opts)?;
    Ok(TakenBack {
        shifted,
        back,
        y,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{bulow_example, profit_worstcase, welfare_worstcase};
    use crate::model::{CostSpec, Firm, Market};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn bulow_report() {
        let inst = bulow_example();
        let r = shock_report(&inst.game, &inst.shock, &opts()).unwrap();
        assert!((r.gamma_u.as_f64() - 0.9924).abs() < 1e-12);
        assert_eq!(r.worst_firm.as_str(), "a");
        assert!((r.profits_post["b"] - 3901.5).abs() < 1e-8);
        assert!(r.bounds.all());
        assert!(!r.all_gain);
    }

    #[test]
    fn worst_case_reports() {
        let r = shock_report(
            &profit_worstcase(2).unwrap().game,
            &profit_worstcase(2).unwrap().shock,
            &opts(),
        )
        .unwrap();
        assert!((r.gamma_u.as_f64() - 0.9375).abs() < 1e-12);
        let inst = welfare_worstcase(2).unwrap();
        let r = shock_report(&inst.game, &inst.shock, &opts()).unwrap();
        assert!((r.gamma_welfare.as_f64() - 0.95).abs() < 1e-12);
        assert!((r.gamma_surplus.as_f64() - 271.0 / 300.0).abs() < 1e-12);
        assert!(r.gamma_welfare.as_f64() >= r.gamma_u.as_f64());
    }

    #[test]
    fn zero_shock_leaves_everything_at_one() {
        let inst = bulow_example();
        let r = shock_report(&inst.game, &PriceShock::zero(), &opts()).unwrap();
        for obj in Objective::ALL {
            assert_eq!(r.gamma(obj), Ratio::Value(1.0));
        }
        assert_eq!(
            negative_shock_ratio(&inst.game, &PriceShock::zero(), Objective::Profit, &opts())
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn zero_baseline_statuses() {
        assert_eq!(Ratio::between(0.0, 3.0, 3.0), Ratio::ZeroBaselineNonneg);
        assert_eq!(Ratio::between(0.0, 0.0, 0.0), Ratio::ZeroBaselineNonneg);
        assert_eq!(
            Ratio::between(1e-20, -1.0, 1.0),
            Ratio::ZeroBaselineNegative
        );
        assert_eq!(Ratio::between(2.0, 1.0, 3.0), Ratio::Value(0.5));
        let (k, r) = extreme_ratio(&[0.0, 2.0], &[1.0, 2.0], false);
        assert_eq!((k, r), (1, Ratio::Value(1.0)));
        assert!(reciprocal(Ratio::ZeroBaselineNonneg).is_err());
    }

    #[test]
    fn idle_firm_has_zero_baseline() {
        let g = Game::new(
            vec![Market::affine("m", 5.0, 1.0).unwrap()],
            vec![Firm::new("f", ["m"], CostSpec::linear(10.0).unwrap())],
        )
        .unwrap();
        let r = shock_report(&g, &PriceShock::new([("m", 1.0)]).unwrap(), &opts()).unwrap();
        assert_eq!(r.gamma_u, Ratio::ZeroBaselineNonneg);
        assert!(r.bounds.profit);
        assert!(matches!(
            negative_shock_ratio(
                &g,
                &PriceShock::new([("m", 1.0)]).unwrap(),
                Objective::Profit,
                &opts()
            ),
            Err(Error::DegenerateRatio(_))
        ));
    }

    #[test]
    fn ratio_json() {
        assert_eq!(serde_json::to_string(&Ratio::Value(0.5)).unwrap(), "0.5");
        assert_eq!(
            serde_json::to_string(&Ratio::ZeroBaselineNegative).unwrap(),
            "\"zero-baseline-negative\""
        );
        for r in [
            Ratio::Value(0.25),
            Ratio::ZeroBaselineNonneg,
            Ratio::ZeroBaselineNegative,
        ] {
            let back: Ratio = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn negative_shock_routes_agree_on_bulow() {
        let inst = bulow_example();
        for obj in Objective::ALL {
            let a = negative_shock_ratio(&inst.game, &inst.shock, obj, &opts()).unwrap();
            let b = negative_shock_ratio_by_reapplication(&inst.game, &inst.shock, obj, &opts())
                .unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs(), "{obj}: {a} vs {b}");
        }
        let u = negative_shock_ratio(&inst.game, &inst.shock, Objective::Profit, &opts()).unwrap();
        assert!((u - 3750.0 / 3721.5).abs() < 1e-12);
    }

    #[test]
    fn negative_shocks_are_rejected_by_reports() {
        let inst = bulow_example();
        let neg = inst.shock.reversed();
        assert!(shock_report(&inst.game, &neg, &opts()).is_err());
    }

    #[test]
    fn bound_formulas() {
        assert_eq!(profit_bound(1).unwrap(), 1.0);
        assert_eq!(profit_bound(2).unwrap(), 15.0 / 16.0);
        assert!(profit_bound(0).is_err());
        assert!((profit_bound(1_000_000).unwrap() - 0.75).abs() < 1e-5);
        assert!((welfare_ratio_formula(2).unwrap() - 0.95).abs() < 1e-15);
        assert_eq!(welfare_ratio_formula(1).unwrap(), 1.0);
        assert!((welfare_ratio_formula(1_000_000).unwrap() - 0.75).abs() < 1e-5);
        assert!((surplus_ratio_formula(2).unwrap() - 271.0 / 300.0).abs() < 1e-15);
        assert_eq!(surplus_ratio_formula(1).unwrap(), 1.0);
        assert_eq!(surplus_bound(), 5.0 / 6.0);
        let bounds: Vec<f64> = (1..200).map(|n| profit_bound(n).unwrap()).collect();
        assert!(bounds.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn objective_names() {
        assert_eq!("U".parse::<Objective>().unwrap(), Objective::Welfare);
        assert_eq!("surplus".parse::<Objective>().unwrap(), Objective::Surplus);
        assert!("x".parse::<Objective>().is_err());
        assert_eq!(Objective::Profit.symbol(), "u");
    }
}
