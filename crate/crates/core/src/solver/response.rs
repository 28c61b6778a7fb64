//! One firm's quantity choice against fixed market conditions.
//!
//! On a sloped lane the firm supplies `max(0, (intercept − λ)/slope)` at marginal
//! level `λ`; a flat lane sells any quantity at a fixed price. The level is found by
//! bisection (aggregate lane supply is nonincreasing in `λ`, marginal cost is
//! nondecreasing) and then recomputed exactly on the identified active set.

use crate::error::{Error, Result};
use crate::model::{CostSpec, Game, PriceShock, QuantityProfile};

const MAX_BISECTIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Lane {
    Sloped {
        intercept: f64,
        slope: f64,
    },
    Flat {
        price: f64,
    },
    /// A flat market that lost the tie-break to another flat market of the firm.
    Idle,
}

/// Bisection on a monotone predicate: `is_high(x)` is false below the root and true above.
/// Stops when the bracket reaches floating-point resolution relative to `scale`.
pub(crate) fn bisect(
    mut lo: f64,
    mut hi: f64,
    scale: f64,
    mut is_high: impl FnMut(f64) -> bool,
) -> f64 {
    let resolution = 2.0
        * f64::EPSILON
        * scale
            .abs()
            .max(lo.abs())
            .max(hi.abs())
            .max(f64::MIN_POSITIVE);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= resolution {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if is_high(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn lane_supply(lanes: &[Lane], level: f64) -> f64 {
    lanes
        .iter()
        .map(|lane| match *lane {
            Lane::Sloped { intercept, slope } if intercept > level => (intercept - level) / slope,
            _ => 0.0,
        })
        .sum()
}

/// Exact level on the active set `{intercept > level}`; `None` if the estimate drifts.
fn polish(
    cost: &CostSpec,
    lanes: &[Lane],
    level: f64,
    cap_binding: bool,
    window: f64,
) -> Option<f64> {
    let (mut weighted, mut inv) = (0.0, 0.0);
    for lane in lanes {
        if let Lane::Sloped { intercept, slope } = *lane {
            if intercept > level {
                weighted += intercept / slope;
                inv += 1.0 / slope;
            }
        }
    }
    if inv == 0.0 {
        return None;
    }
    let exact = if cap_binding {
        (weighted - cost.cap()?) / inv
    } else {
        (2.0 * cost.a() * weighted + cost.b()) / (1.0 + 2.0 * cost.a() * inv)
    };
    ((exact - level).abs() <= window).then_some(exact)
}

/// Fills `out` with the optimal quantity per lane and returns the marginal level `λ`.
/// `Err(slot)` flags an unbounded choice on flat lane `slot`.
pub(crate) fn allocate(
    cost: &CostSpec,
    lanes: &[Lane],
    out: &mut [f64],
) -> std::result::Result<f64, usize> {
    debug_assert_eq!(lanes.len(), out.len());
    let fill = |level: f64, out: &mut [f64]| {
        for (q, lane) in out.iter_mut().zip(lanes) {
            *q = match *lane {
                Lane::Sloped { intercept, slope } if intercept > level => {
                    (intercept - level) / slope
                }
                _ => 0.0,
            };
        }
    };

    let flat = lanes
        .iter()
        .enumerate()
        .find_map(|(slot, lane)| match *lane {
            Lane::Flat { price } => Some((slot, price)),
            _ => None,
        });

    if let Some((slot, price)) = flat {
        let sloped = lane_supply(lanes, price);
        let room = cost.cap().is_none_or(|cap| sloped < cap);
        // Strict inequality: indifference at the flat price resolves to zero on the flat lane.
        if room && cost.marginal_unchecked(sloped) < price {
            let total = match (cost.quantity_at_marginal(price), cost.cap()) {
                (Some(q), Some(cap)) => q.min(cap),
                (Some(q), None) => q,
                (None, Some(cap)) => cap,
                (None, None) => return Err(slot),
            };
            fill(price, out);
            out[slot] = (total - sloped).max(0.0);
            return Ok(price);
        }
    }

    let floor = cost.marginal_unchecked(0.0);
    let ceiling = lanes
        .iter()
        .filter_map(|lane| match *lane {
            Lane::Sloped { intercept, .. } => Some(intercept),
            _ => None,
        })
        .fold(floor, f64::max);
    if ceiling <= floor {
        out.iter_mut().for_each(|q| *q = 0.0);
        return Ok(floor);
    }
    let scale = ceiling.abs().max(floor.abs());
    let window = 1e-9 * scale.max(1.0);

    let mut level = bisect(floor, ceiling, scale, |l| {
        l >= cost.marginal_unchecked(lane_supply(lanes, l))
    });
    let mut cap_binding = false;
    if let Some(cap) = cost.cap() {
        if lane_supply(lanes, level) > cap {
            level = bisect(level, ceiling, scale, |l| lane_supply(lanes, l) <= cap);
            cap_binding = true;
        }
    }
    if let Some(exact) = polish(cost, lanes, level, cap_binding, window) {
        level = exact;
    }

    fill(level, out);
    if let Some(cap) = cost.cap() {
        let total: f64 = out.iter().sum();
        if total > cap {
            let shrink = cap / total;
            out.iter_mut().for_each(|q| *q *= shrink);
        }
    }
    Ok(level)
}

/// Per-firm slot of the flat market that absorbs residual quantity: highest shocked
/// price, ties to the lowest market id.
pub(crate) fn absorbing_slots(game: &Game, deltas: &[f64]) -> Vec<Option<usize>> {
    (0..game.n_firms())
        .map(|i| {
            game.slots(i)
                .iter()
                .enumerate()
                .filter(|(_, &m)| game.markets()[m].is_constant_price())
                .map(|(slot, &m)| (slot, m, game.price_at(m, 0.0, deltas[m])))
                .min_by(|a, b| {
                    b.2.total_cmp(&a.2)
                        .then_with(|| game.markets()[a.1].id().cmp(game.markets()[b.1].id()))
                })
                .map(|(slot, _, _)| slot)
        })
        .collect()
}

/// Builds the lanes of firm `i`; `sloped(m, slot)` supplies `(intercept, slope)` on sloped markets.
pub(crate) fn lanes_for(
    game: &Game,
    i: usize,
    deltas: &[f64],
    absorbing: Option<usize>,
    mut sloped: impl FnMut(usize, usize) -> (f64, f64),
    lanes: &mut Vec<Lane>,
) {
    lanes.clear();
    for (slot, &m) in game.slots(i).iter().enumerate() {
        let lane = if game.markets()[m].is_constant_price() {
            if absorbing == Some(slot) {
                Lane::Flat {
                    price: game.price_at(m, 0.0, deltas[m]),
                }
            } else {
                Lane::Idle
            }
        } else {
            let (intercept, slope) = sloped(m, slot);
            Lane::Sloped { intercept, slope }
        };
        lanes.push(lane);
    }
}

pub(crate) fn unbounded(game: &Game, i: usize, slot: usize) -> Error {
    Error::Unbounded {
        firm: game.firms()[i].id().to_string(),
        market: game.firms()[i].markets()[slot].to_string(),
    }
}

/// Best response of firm `i` to the others' quantities in `layout` (its own row is ignored).
#[allow(clippy::too_many_arguments)]
pub(crate) fn best_response_at(
    game: &Game,
    i: usize,
    layout: &[Vec<f64>],
    totals: &[f64],
    deltas: &[f64],
    absorbing: Option<usize>,
    lanes: &mut Vec<Lane>,
    out: &mut [f64],
) -> Result<f64> {
    let own = &layout[i];
    lanes_for(
        game,
        i,
        deltas,
        absorbing,
        |m, slot| {
            let (p, r) = game.markets()[m]
                .affine_coefficients()
                .expect("affine game");
            let others = totals[m] - own[slot];
            (p + deltas[m] - r * others, 2.0 * r)
        },
        lanes,
    );
    allocate(game.firms()[i].cost_spec(), lanes, out).map_err(|slot| unbounded(game, i, slot))
}

/// Firm `firm`'s utility-maximizing quantities against `others`, in the order of
/// `Firm::markets`. The firm's own entries in `others` are ignored.
pub fn best_response(
    game: &Game,
    firm: &str,
    others: &QuantityProfile,
    shock: Option<&PriceShock>,
) -> Result<Vec<f64>> {
    game.require_affine()?;
    let i = game.firm_idx(firm)?;
    let layout = others.layout(game)?;
    if let Some(&q) = layout
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .flat_map(|(_, row)| row)
        .find(|q| **q < 0.0)
    {
        return Err(Error::NegativeQuantity(q));
    }
    let totals = game.market_totals(&layout);
    let deltas = crate::model::resolve_deltas(game, shock)?;
    let absorbing = absorbing_slots(game, &deltas);
    let mut lanes = Vec::new();
    let mut out = vec![0.0; layout[i].len()];
    best_response_at(
        game,
        i,
        &layout,
        &totals,
        &deltas,
        absorbing[i],
        &mut lanes,
        &mut out,
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{bulow_example, profit_worstcase};
    use crate::model::{Firm, Market};

    #[test]
    fn bulow_post_shock_best_response_of_a() {
        let inst = bulow_example();
        let y = inst.stated_post.unwrap();
        let br = best_response(&inst.game, "a", &y, Some(&inst.shock)).unwrap();
        assert!((br[0] - 8.0).abs() < 1e-12, "{br:?}");
        assert!((br[1] - 47.0).abs() < 1e-12, "{br:?}");
    }

    #[test]
    fn bulow_pre_shock_tie_resolves_to_zero() {
        let inst = bulow_example();
        let x = inst.stated_pre.unwrap();
        let br = best_response(&inst.game, "a", &x, None).unwrap();
        assert_eq!(br[0], 0.0);
        assert!((br[1] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn monopoly_quantity() {
        let g = Game::new(
            vec![Market::affine("m", 2.0, 1.0).unwrap()],
            vec![Firm::new("solo", ["m"], CostSpec::zero())],
        )
        .unwrap();
        let br = best_response(&g, "solo", &QuantityProfile::zeros(&g), None).unwrap();
        assert!((br[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn capped_firm_after_shock() {
        let inst = profit_worstcase(2).unwrap();
        let y = inst.stated_post.unwrap();
        let br = best_response(&inst.game, "a", &y, Some(&inst.shock)).unwrap();
        assert!((br[0] - 1.0 / 6.0).abs() < 1e-14, "{br:?}");
        assert!((br[1] - 0.5).abs() < 1e-14, "{br:?}");
    }

    #[test]
    fn flat_lane_without_bound_is_unbounded() {
        let lanes = [Lane::Flat { price: 1.0 }];
        let mut out = [0.0];
        assert_eq!(allocate(&CostSpec::zero(), &lanes, &mut out), Err(0));
        assert_eq!(
            allocate(&CostSpec::linear(2.0).unwrap(), &lanes, &mut out),
            Ok(2.0)
        );
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn strictly_convex_cost_stops_on_flat_lane() {
        let lanes = [
            Lane::Flat { price: 3.0 },
            Lane::Sloped {
                intercept: 5.0,
                slope: 2.0,
            },
        ];
        let mut out = [0.0; 2];
        let cost = CostSpec::quadratic(0.5, 0.0).unwrap();
        let level = allocate(&cost, &lanes, &mut out).unwrap();
        assert_eq!(level, 3.0);
        assert!((out[1] - 1.0).abs() < 1e-15);
        assert!((out[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn nothing_worth_producing() {
        let lanes = [Lane::Sloped {
            intercept: 1.0,
            slope: 1.0,
        }];
        let mut out = [7.0];
        let level = allocate(&CostSpec::linear(2.0).unwrap(), &lanes, &mut out).unwrap();
        assert_eq!(level, 2.0);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn bisect_finds_square_root() {
        let r = bisect(0.0, 2.0, 2.0, |x| x * x >= 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_concave_games() {
        let inst = crate::instances::concave_small_shock(4).unwrap();
        let x = inst.stated_pre.unwrap();
        assert!(matches!(
            best_response(&inst.game, "a", &x, None),
            Err(Error::UnsupportedPrice(_))
        ));
    }
}
