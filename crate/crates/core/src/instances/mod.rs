//! Closed-form worst-case constructions, the two-market example with an elastic
//! monopoly market, and a seeded random game generator.

pub mod anchor;
mod random;

use serde::{Deserialize, Serialize};

use crate::analysis::Objective;
use crate::error::{Error, Result};
use crate::model::{CostSpec, Firm, Game, Market, PriceShock, QuantityProfile};
use anchor::{Anchor, ConcaveAnchorPrice};

pub use random::{random_game, random_shock, RandomGameConfig};

/// A ratio the construction is known to attain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedGamma {
    pub objective: Objective,
    pub value: f64,
}

/// A fully specified game together with its shock and, where known, its equilibria.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedInstance {
    pub name: String,
    pub game: Game,
    pub shock: PriceShock,
    pub stated_pre: Option<QuantityProfile>,
    pub stated_post: Option<QuantityProfile>,
    pub expected: Vec<ExpectedGamma>,
    /// Firm whose profit ratio the construction targets.
    pub focus_firm: Option<String>,
}

/// Everything except the game, for writing next to a game file.
#[derive(Serialize)]
pub struct Sidecar<'a> {
    pub name: &'a str,
    pub shock: &'a PriceShock,
    pub stated_pre: &'a Option<QuantityProfile>,
    pub stated_post: &'a Option<QuantityProfile>,
    pub expected: &'a [ExpectedGamma],
    pub focus_firm: &'a Option<String>,
}

impl NamedInstance {
    pub fn sidecar(&self) -> Sidecar<'_> {
        Sidecar {
            name: &self.name,
            shock: &self.shock,
            stated_pre: &self.stated_pre,
            stated_post: &self.stated_post,
            expected: &self.expected,
            focus_firm: &self.focus_firm,
        }
    }

    pub fn expected_for(&self, objective: Objective) -> Option<f64> {
        self.expected
            .iter()
            .find(|e| e.objective == objective)
            .map(|e| e.value)
    }
}

fn competitor_ids(count: usize) -> Vec<String> {
    (1..=count).map(|j| format!("b{j}")).collect()
}

fn profile(game: &Game, entries: Vec<(String, &str, f64)>) -> Result<QuantityProfile> {
    QuantityProfile::from_entries(game, entries)
}

/// Two firms, a constant-price market private to firm `a` and a shared market with
/// slope 1; both firms have cost `q²/2`. Raising the private price from 50 to 55
/// lowers firm `a`'s profit from 3750 to 3721.5.
pub fn bulow_example() -> NamedInstance {
    let cost = CostSpec::quadratic(0.5, 0.0).expect("valid cost");
    let game = Game::new(
        vec![
            Market::affine("m1", 50.0, 0.0).expect("valid market"),
            Market::affine("m2", 200.0, 1.0).expect("valid market"),
        ],
        vec![
            Firm::new("a", ["m1", "m2"], cost),
            Firm::new("b", ["m2"], cost),
        ],
    )
    .expect("valid game");
    let pre = QuantityProfile::from_entries(
        &game,
        [("a", "m1", 0.0), ("a", "m2", 50.0), ("b", "m2", 50.0)],
    )
    .expect("valid profile");
    let post = QuantityProfile::from_entries(
        &game,
        [("a", "m1", 8.0), ("a", "m2", 47.0), ("b", "m2", 51.0)],
    )
    .expect("valid profile");
    NamedInstance {
        name: "bulow".into(),
        game,
        shock: PriceShock::new([("m1", 5.0)]).expect("valid shock"),
        stated_pre: Some(pre),
        stated_post: Some(post),
        expected: vec![ExpectedGamma {
            objective: Objective::Profit,
            value: 3721.5 / 3750.0,
        }],
        focus_firm: Some("a".into()),
    }
}

fn require_n(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "needs at least 2 firms, got {n}"
        )));
    }
    Ok(n as f64)
}

/// Shared layout: `m1` with constant price 0 private to `a`, `m2 = 2 − q` shared by all.
fn elastic_layout(
    cost_a: CostSpec,
    competitor_cost: CostSpec,
    competitors: &[String],
) -> Result<Game> {
    let mut firms = vec![Firm::new("a", ["m1", "m2"], cost_a)];
    firms.extend(
        competitors
            .iter()
            .map(|id| Firm::new(id.as_str(), ["m2"], competitor_cost)),
    );
    Game::new(
        vec![
            Market::affine("m1", 0.0, 0.0)?,
            Market::affine("m2", 2.0, 1.0)?,
        ],
        firms,
    )
}

/// `n` zero-cost firms; firm `a` has capacity `2/(n+1)` and sole access to a
/// constant-price market. The shock `δ₁ = (n−1)/n²` costs `a` the fraction `(n−1)²/(4n²)`.
pub fn profit_worstcase(n: usize) -> Result<NamedInstance> {
    let nf = require_n(n)?;
    let bs = competitor_ids(n - 1);
    let game = elastic_layout(
        CostSpec::zero().with_cap(2.0 / (nf + 1.0))?,
        CostSpec::zero(),
        &bs,
    )?;

    let share = 2.0 / (nf + 1.0);
    let mut pre = vec![("a".to_string(), "m2", share)];
    pre.extend(bs.iter().map(|b| (b.clone(), "m2", share)));
    let mut post = vec![
        ("a".to_string(), "m1", (nf - 1.0) / (nf * (nf + 1.0))),
        ("a".to_string(), "m2", 1.0 / nf),
    ];
    post.extend(
        bs.iter()
            .map(|b| (b.clone(), "m2", (2.0 * nf - 1.0) / (nf * nf))),
    );

    Ok(NamedInstance {
        name: format!("profit-worstcase-{n}"),
        stated_pre: Some(profile(&game, pre)?),
        stated_post: Some(profile(&game, post)?),
        game,
        shock: PriceShock::new([("m1", (nf - 1.0) / (nf * nf))])?,
        expected: vec![ExpectedGamma {
            objective: Objective::Profit,
            value: crate::analysis::profit_bound(n)?,
        }],
        focus_firm: Some("a".into()),
    })
}

/// Firm `a` produces up to 1 unit for free; `n−1` competitors pay 1 per unit.
/// The shock on `a`'s private market lowers total profit by `(n−1)²/(4(n²+n−1))`
/// and the surplus towards 5/6 of its initial value.
pub fn welfare_worstcase(n: usize) -> Result<NamedInstance> {
    let nf = require_n(n)?;
    let bs = competitor_ids(n - 1);
    let game = elastic_layout(CostSpec::zero().with_cap(1.0)?, CostSpec::linear(1.0)?, &bs)?;
    let d = nf * nf + nf - 1.0;

    let mut pre = vec![("a".to_string(), "m2", 1.0)];
    pre.extend(bs.iter().map(|b| (b.clone(), "m2", 0.0)));
    let mut post = vec![
        ("a".to_string(), "m1", (nf * nf - nf) / (2.0 * d)),
        (
            "a".to_string(),
            "m2",
            (nf * nf + 3.0 * nf - 2.0) / (2.0 * d),
        ),
    ];
    post.extend(bs.iter().map(|b| (b.clone(), "m2", (nf - 1.0) / (2.0 * d))));

    let surplus_post =
        (10.0 * nf.powi(4) + 22.0 * nf.powi(3) - 7.0 * nf * nf - 24.0 * nf + 11.0) / (8.0 * d * d);
    Ok(NamedInstance {
        name: format!("welfare-worstcase-{n}"),
        stated_pre: Some(profile(&game, pre)?),
        stated_post: Some(profile(&game, post)?),
        game,
        shock: PriceShock::new([("m1", (nf * nf - 1.0) / (2.0 * d))])?,
        expected: vec![
            ExpectedGamma {
                objective: Objective::Welfare,
                value: crate::analysis::welfare_ratio_formula(n)?,
            },
            ExpectedGamma {
                objective: Objective::Surplus,
                value: surplus_post / 1.5,
            },
        ],
        focus_firm: None,
    })
}

/// Concave shared price with `k²` unit-cost competitors: a shock of size `O(1/k)`
/// cuts firm `a`'s profit from 1 to `2/k`. Verification only; not solvable by the
/// affine solver.
pub fn concave_small_shock(k: usize) -> Result<NamedInstance> {
    if k < 4 {
        return Err(Error::InvalidArgument(format!(
            "k must be at least 4, got {k}"
        )));
    }
    let kf = k as f64;
    let price = ConcaveAnchorPrice::new(vec![
        Anchor::new(1.0, 1.0, -1.0),
        Anchor::new(1.0 + 1.0 / kf, 1.0 - 2.0 / kf, -kf),
    ])?;
    let bs = competitor_ids(k * k);
    let mut firms = vec![Firm::new(
        "a",
        ["m1", "m2"],
        CostSpec::zero().with_cap(1.0)?,
    )];
    firms.extend(bs.iter().map(|b| {
        Firm::new(
            b.as_str(),
            ["m2"],
            CostSpec::linear(1.0).expect("valid cost"),
        )
    }));
    let game = Game::new(
        vec![
            Market::affine("m1", 0.0, 0.0)?,
            Market::anchored("m2", price),
        ],
        firms,
    )?;

    let mut pre = vec![("a".to_string(), "m2", 1.0)];
    pre.extend(bs.iter().map(|b| (b.clone(), "m2", 0.0)));
    let mut post = vec![
        ("a".to_string(), "m1", 1.0 - 1.0 / kf),
        ("a".to_string(), "m2", 1.0 / kf),
    ];
    post.extend(bs.iter().map(|b| (b.clone(), "m2", 1.0 / (kf * kf))));

    Ok(NamedInstance {
        name: format!("concave-small-{k}"),
        stated_pre: Some(profile(&game, pre)?),
        stated_post: Some(profile(&game, post)?),
        game,
        shock: PriceShock::new([("m1", 1.0 / kf), ("m2", 3.0 / kf)])?,
        expected: vec![ExpectedGamma {
            objective: Objective::Profit,
            value: 2.0 / kf,
        }],
        focus_firm: Some("a".into()),
    })
}

/// `1 + 5/(4k) − (k + 1/k) / (4(k − 1/k + 1/2))`, the profit ratio of the two-firm
/// concave construction; decreases towards 3/4.
pub fn concave_two_firm_ratio(k: f64) -> f64 {
    1.0 + 1.25 / k - 0.25 * (k + 1.0 / k) / (k - 1.0 / k + 0.5)
}

/// Two firms, one private affine market and a concave shared market: the profit
/// ratio of firm `a` approaches 3/4 as `k` grows.
pub fn concave_two_firm(k: usize) -> Result<NamedInstance> {
    if k <= 4 {
        return Err(Error::InvalidArgument(format!("k must exceed 4, got {k}")));
    }
    let kf = k as f64;
    let steep = (kf + 1.0 / kf) / (kf + 0.5 - 1.0 / kf);
    let price = ConcaveAnchorPrice::new(vec![
        Anchor::new(kf + 1.0 - 1.0 / kf, kf + 1.0 / kf, -steep),
        Anchor::new(kf + 1.0, kf, -1.0),
    ])?;
    let game = Game::new(
        vec![
            Market::affine("m1", kf - 1.0, 1.0 / kf)?,
            Market::anchored("m2", price),
        ],
        vec![
            Firm::new(
                "a",
                ["m1", "m2"],
                CostSpec::linear(kf - 1.0)?.with_cap(1.0)?,
            ),
            Firm::new("b", ["m2"], CostSpec::zero()),
        ],
    )?;
    let delta1 = 1.0 + 2.0 / kf - (kf + 1.0 / kf) / (2.0 * (kf - 1.0 / kf + 0.5));
    let pre = QuantityProfile::from_entries(
        &game,
        [("a", "m1", 0.0), ("a", "m2", 1.0), ("b", "m2", kf)],
    )?;
    let post = QuantityProfile::from_entries(
        &game,
        [
            ("a", "m1", 0.5),
            ("a", "m2", 0.5),
            ("b", "m2", kf - 1.0 / kf + 0.5),
        ],
    )?;
    Ok(NamedInstance {
        name: format!("concave-two-firm-{k}"),
        game,
        shock: PriceShock::new([("m1", delta1)])?,
        stated_pre: Some(pre),
        stated_post: Some(post),
        expected: vec![ExpectedGamma {
            objective: Objective::Profit,
            value: concave_two_firm_ratio(kf),
        }],
        focus_firm: Some("a".into()),
    })
}
