use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::cost::CAP_SLACK;
use super::game::{FirmId, Game, MarketId};
use crate::error::{Error, Result};

/// Per-firm, per-market quantities (`firm → market → q`). Missing entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantityProfile {
    q: IndexMap<FirmId, IndexMap<MarketId, f64>>,
}

/// Dense per-firm quantity vectors aligned with `Firm::markets`.
pub(crate) type Layout = Vec<Vec<f64>>;

impl QuantityProfile {
    /// The all-zero profile of `game`, with every accessible entry present.
    pub fn zeros(game: &Game) -> Self {
        let layout: Layout = game
            .firms()
            .iter()
            .map(|f| vec![0.0; f.markets().len()])
            .collect();
        QuantityProfile::from_layout(game, &layout)
    }

    pub fn from_entries<F, M>(
        game: &Game,
        entries: impl IntoIterator<Item = (F, M, f64)>,
    ) -> Result<Self>
    where
        F: Into<FirmId>,
        M: Into<MarketId>,
    {
        let mut profile = QuantityProfile::zeros(game);
        for (f, m, q) in entries {
            profile.set(game, f.into(), m.into(), q)?;
        }
        Ok(profile)
    }

    pub(crate) fn from_layout(game: &Game, layout: &[Vec<f64>]) -> Self {
        let q = game
            .firms()
            .iter()
            .zip(layout)
            .map(|(f, row)| {
                let inner = f
                    .markets()
                    .iter()
                    .cloned()
                    .zip(row.iter().copied())
                    .collect();
                (f.id().clone(), inner)
            })
            .collect();
        QuantityProfile { q }
    }

    pub fn set(&mut self, game: &Game, firm: FirmId, market: MarketId, q: f64) -> Result<()> {
        let f = game.firm(firm.as_str())?;
        game.market_idx(market.as_str())?;
        if !f.markets().contains(&market) {
            return Err(Error::NoAccess {
                firm: firm.to_string(),
                market: market.to_string(),
            });
        }
        self.q.entry(firm).or_default().insert(market, q);
        Ok(())
    }

    pub fn get(&self, firm: &str, market: &str) -> f64 {
        self.q
            .get(firm)
            .and_then(|row| row.get(market))
            .copied()
            .unwrap_or(0.0)
    }

    /// `q_i`, the firm's total quantity.
    pub fn firm_total(&self, firm: &str) -> f64 {
        self.q
            .get(firm)
            .map(|row| row.values().sum())
            .unwrap_or(0.0)
    }

    /// `q_m`, the total quantity on a market.
    pub fn market_total(&self, market: &str) -> f64 {
        self.q.values().filter_map(|row| row.get(market)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FirmId, &MarketId, f64)> {
        self.q
            .iter()
            .flat_map(|(f, row)| row.iter().map(move |(m, q)| (f, m, *q)))
    }

    /// Dense vectors for `game`; rejects unknown ids and entries on inaccessible markets.
    pub(crate) fn layout(&self, game: &Game) -> Result<Layout> {
        let mut layout: Layout = game
            .firms()
            .iter()
            .map(|f| vec![0.0; f.markets().len()])
            .collect();
        for (firm, row) in &self.q {
            let i = game.firm_idx(firm.as_str())?;
            let f = &game.firms()[i];
            for (market, &q) in row {
                game.market_idx(market.as_str())?;
                let slot = f
                    .markets()
                    .iter()
                    .position(|m| m == market)
                    .ok_or_else(|| Error::NoAccess {
                        firm: firm.to_string(),
                        market: market.to_string(),
                    })?;
                if !q.is_finite() {
                    return Err(Error::ProfileShape(format!(
                        "non-finite quantity for `{firm}`/`{market}`"
                    )));
                }
                layout[i][slot] = q;
            }
        }
        Ok(layout)
    }

    /// Layout that additionally satisfies `q ≥ 0` and the capacities.
    pub(crate) fn feasible_layout(&self, game: &Game) -> Result<Layout> {
        let layout = self.layout(game)?;
        check_feasible(game, &layout)?;
        Ok(layout)
    }

    pub fn is_feasible(&self, game: &Game) -> bool {
        self.feasible_layout(game).is_ok()
    }

    /// Largest absolute entrywise difference; entries missing on one side count as zero.
    pub fn sup_distance(&self, other: &QuantityProfile) -> f64 {
        let one_way = |a: &QuantityProfile, b: &QuantityProfile| {
            a.iter()
                .map(|(f, m, q)| (q - b.get(f.as_str(), m.as_str())).abs())
                .fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }
}

pub(crate) fn check_feasible(game: &Game, layout: &[Vec<f64>]) -> Result<()> {
    for (f, row) in game.firms().iter().zip(layout) {
        if let Some(&q) = row.iter().find(|q| q.is_nan() || **q < 0.0) {
            return Err(Error::NegativeQuantity(q));
        }
        if let Some(cap) = f.cap() {
            let total: f64 = row.iter().sum();
            if total > cap + CAP_SLACK * cap.max(1.0) {
                return Err(Error::InfeasibleQuantity {
                    quantity: total,
                    cap,
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShockSign {
    Positive,
    Negative,
}

/// Additive shift of market price intercepts. Missing markets are unshocked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexMap<MarketId, f64>", into = "IndexMap<MarketId, f64>")]
pub struct PriceShock {
    delta: IndexMap<MarketId, f64>,
    sign: ShockSign,
}

impl TryFrom<IndexMap<MarketId, f64>> for PriceShock {
    type Error = Error;

    fn try_from(delta: IndexMap<MarketId, f64>) -> Result<Self> {
        PriceShock::new(delta)
    }
}

impl From<PriceShock> for IndexMap<MarketId, f64> {
    fn from(s: PriceShock) -> Self {
        s.delta
    }
}

impl PriceShock {
    /// A positive shock: every `δ_m ≥ 0`.
    pub fn new<M: Into<MarketId>>(delta: impl IntoIterator<Item = (M, f64)>) -> Result<Self> {
        Self::build(delta, ShockSign::Positive)
    }

    /// A negative shock: every `δ_m ≤ 0`.
    pub fn negative<M: Into<MarketId>>(delta: impl IntoIterator<Item = (M, f64)>) -> Result<Self> {
        Self::build(delta, ShockSign::Negative)
    }

    fn build<M: Into<MarketId>>(
        delta: impl IntoIterator<Item = (M, f64)>,
        sign: ShockSign,
    ) -> Result<Self> {
        let mut map = IndexMap::new();
        for (m, d) in delta {
            let m = m.into();
            let ok = d.is_finite()
                && match sign {
                    ShockSign::Positive => d >= 0.0,
                    ShockSign::Negative => d <= 0.0,
                };
            if !ok {
                return Err(Error::InvalidShock {
                    market: m.to_string(),
                    reason: format!("{d} has the wrong sign for a {sign:?} shock"),
                });
            }
            if map.insert(m.clone(), d).is_some() {
                return Err(Error::DuplicateId(m.to_string()));
            }
        }
        Ok(PriceShock { delta: map, sign })
    }

    pub fn zero() -> Self {
        PriceShock {
            delta: IndexMap::new(),
            sign: ShockSign::Positive,
        }
    }

    pub fn sign(&self) -> ShockSign {
        self.sign
    }

    pub fn is_positive(&self) -> bool {
        self.sign == ShockSign::Positive
    }

    pub fn get(&self, market: &str) -> f64 {
        self.delta.get(market).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MarketId, f64)> {
        self.delta.iter().map(|(m, d)| (m, *d))
    }

    /// The shock that takes this one back.
    pub fn reversed(&self) -> PriceShock {
        PriceShock {
            delta: self.delta.iter().map(|(m, d)| (m.clone(), -d)).collect(),
            sign: match self.sign {
                ShockSign::Positive => ShockSign::Negative,
                ShockSign::Negative => ShockSign::Positive,
            },
        }
    }

    /// Dense per-market deltas for `game`; rejects unknown market ids.
    pub(crate) fn deltas(&self, game: &Game) -> Result<Vec<f64>> {
        let mut out = vec![0.0; game.markets().len()];
        for (m, d) in &self.delta {
            out[game.market_idx(m.as_str())?] = *d;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("shock serialization is infallible")
    }
}

pub(crate) fn resolve_deltas(game: &Game, shock: Option<&PriceShock>) -> Result<Vec<f64>> {
    match shock {
        Some(s) => s.deltas(game),
        None => Ok(vec![0.0; game.markets().len()]),
    }
}
