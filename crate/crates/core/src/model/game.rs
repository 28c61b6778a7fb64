use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use crate::error::{Error, Result};
use crate::instances::anchor::{Anchor, ConcaveAnchorPrice};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(MarketId);
string_id!(FirmId);

/// Inverse demand of a market.
#[derive(Clone, Debug, PartialEq)]
pub enum PriceFunction {
    /// `p − r·q`.
    Affine {
        p: f64,
        r: f64,
    },
    Anchored(ConcaveAnchorPrice),
}

impl PriceFunction {
    pub fn value(&self, q: f64) -> f64 {
        match self {
            PriceFunction::Affine { p, r } => p - r * q,
            PriceFunction::Anchored(c) => c.value(q),
        }
    }

    pub fn slope(&self, q: f64) -> f64 {
        match self {
            PriceFunction::Affine { r, .. } => -r,
            PriceFunction::Anchored(c) => c.slope(q),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, PriceFunction::Affine { .. })
    }

    pub(crate) fn shifted(&self, delta: f64) -> Result<Self> {
        Ok(match self {
            PriceFunction::Affine { p, r } => PriceFunction::Affine {
                p: p + delta,
                r: *r,
            },
            PriceFunction::Anchored(c) => PriceFunction::Anchored(c.shifted(delta)?),
        })
    }

    pub(crate) fn scaled(&self, alpha: f64) -> Result<Self> {
        Ok(match self {
            PriceFunction::Affine { p, r } => PriceFunction::Affine {
                p: p * alpha,
                r: r * alpha,
            },
            PriceFunction::Anchored(c) => PriceFunction::Anchored(c.scaled(alpha)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Market {
    id: MarketId,
    price: PriceFunction,
}

impl Market {
    pub fn affine(id: impl Into<MarketId>, p: f64, r: f64) -> Result<Self> {
        let id = id.into();
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidMarket {
                market: id.to_string(),
                reason: format!("intercept {p} must be finite and >= 0"),
            });
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidMarket {
                market: id.to_string(),
                reason: format!("slope {r} must be finite and >= 0"),
            });
        }
        Ok(Market {
            id,
            price: PriceFunction::Affine { p, r },
        })
    }

    pub fn anchored(id: impl Into<MarketId>, price: ConcaveAnchorPrice) -> Self {
        Market {
            id: id.into(),
            price: PriceFunction::Anchored(price),
        }
    }

    pub fn id(&self) -> &MarketId {
        &self.id
    }

    pub fn price_function(&self) -> &PriceFunction {
        &self.price
    }

    /// `(p, r)` of an affine market.
    pub fn affine_coefficients(&self) -> Option<(f64, f64)> {
        match self.price {
            PriceFunction::Affine { p, r } => Some((p, r)),
            PriceFunction::Anchored(_) => None,
        }
    }

    /// Affine with `r = 0`: the price does not react to quantity.
    pub fn is_constant_price(&self) -> bool {
        matches!(self.price, PriceFunction::Affine { r, .. } if r == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Firm {
    id: FirmId,
    markets: Vec<MarketId>,
    cost: CostSpec,
}

impl Firm {
    pub fn new<M: Into<MarketId>>(
        id: impl Into<FirmId>,
        markets: impl IntoIterator<Item = M>,
        cost: CostSpec,
    ) -> Self {
        Firm {
            id: id.into(),
            markets: markets.into_iter().map(Into::into).collect(),
            cost,
        }
    }

    pub fn id(&self) -> &FirmId {
        &self.id
    }

    /// Accessible markets, in the order used by per-firm quantity vectors.
    pub fn markets(&self) -> &[MarketId] {
        &self.markets
    }

    pub fn cost_spec(&self) -> &CostSpec {
        &self.cost
    }

    pub fn cost(&self, q: f64) -> Result<f64> {
        self.cost.value(q)
    }

    pub fn marginal_cost(&self, q: f64) -> Result<f64> {
        self.cost.marginal(q)
    }

    pub fn cap(&self) -> Option<f64> {
        self.cost.cap()
    }
}

/// A multimarket oligopoly. Immutable once constructed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameJson", into = "GameJson")]
pub struct Game {
    markets: Vec<Market>,
    firms: Vec<Firm>,
    market_index: HashMap<MarketId, usize>,
    firm_index: HashMap<FirmId, usize>,
    /// Per firm, the market index of each slot.
    slots: Vec<Vec<usize>>,
    /// Per market, the `(firm, slot)` pairs with access.
    access: Vec<Vec<(usize, usize)>>,
}

impl Game {
    pub fn new(markets: Vec<Market>, firms: Vec<Firm>) -> Result<Self> {
        if firms.is_empty() {
            return Err(Error::InvalidArgument(
                "a game needs at least one firm".into(),
            ));
        }
        let mut market_index = HashMap::with_capacity(markets.len());
        for (k, m) in markets.iter().enumerate() {
            if market_index.insert(m.id.clone(), k).is_some() {
                return Err(Error::DuplicateId(m.id.to_string()));
            }
        }
        let mut firm_index = HashMap::with_capacity(firms.len());
        let mut slots = Vec::with_capacity(firms.len());
        let mut access = vec![Vec::new(); markets.len()];
        for (i, f) in firms.iter().enumerate() {
            if firm_index.insert(f.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(f.id.to_string()));
            }
            if f.markets.is_empty() {
                return Err(Error::InvalidFirm {
                    firm: f.id.to_string(),
                    reason: "firm must serve at least one market".into(),
                });
            }
            let mut own = Vec::with_capacity(f.markets.len());
            for (slot, mid) in f.markets.iter().enumerate() {
                let m = *market_index.get(mid).ok_or_else(|| Error::InvalidFirm {
                    firm: f.id.to_string(),
                    reason: format!("unknown market `{mid}`"),
                })?;
                if own.contains(&m) {
                    return Err(Error::InvalidFirm {
                        firm: f.id.to_string(),
                        reason: format!("market `{mid}` listed twice"),
                    });
                }
                own.push(m);
                access[m].push((i, slot));
            }
            slots.push(own);
        }

        let game = Game {
            markets,
            firms,
            market_index,
            firm_index,
            slots,
            access,
        };
        game.check_constant_price_markets()?;
        Ok(game)
    }

    /// A constant-price market must be private to one firm, and that firm must not be
    /// able to sell an unbounded quantity there.
    fn check_constant_price_markets(&self) -> Result<()> {
        for (m, market) in self.markets.iter().enumerate() {
            if !market.is_constant_price() {
                continue;
            }
            let eligible = &self.access[m];
            if eligible.len() != 1 {
                return Err(Error::InvalidMarket {
                    market: market.id.to_string(),
                    reason: format!(
                        "a constant-price market needs exactly one firm, found {}",
                        eligible.len()
                    ),
                });
            }
            let firm = &self.firms[eligible[0].0];
            if !firm.cost.is_strictly_convex() && firm.cost.cap().is_none() {
                return Err(Error::Unbounded {
                    firm: firm.id.to_string(),
                    market: market.id.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn markets(&self) -> &[Market] {
        &self.markets
    }

    pub fn firms(&self) -> &[Firm] {
        &self.firms
    }

    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn market_idx(&self, id: &str) -> Result<usize> {
        self.market_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownMarket(id.to_owned()))
    }

    pub fn firm_idx(&self, id: &str) -> Result<usize> {
        self.firm_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownFirm(id.to_owned()))
    }

    pub fn market(&self, id: &str) -> Result<&Market> {
        Ok(&self.markets[self.market_idx(id)?])
    }

    pub fn firm(&self, id: &str) -> Result<&Firm> {
        Ok(&self.firms[self.firm_idx(id)?])
    }

    /// Market indices of firm `i`'s slots.
    pub(crate) fn slots(&self, i: usize) -> &[usize] {
        &self.slots[i]
    }

    /// `(firm, slot)` pairs on market `m`.
    pub(crate) fn access(&self, m: usize) -> &[(usize, usize)] {
        &self.access[m]
    }

    pub fn is_affine(&self) -> bool {
        self.markets.iter().all(|m| m.price.is_affine())
    }

    pub(crate) fn require_affine(&self) -> Result<()> {
        match self.markets.iter().find(|m| !m.price.is_affine()) {
            Some(m) => Err(Error::UnsupportedPrice(m.id.to_string())),
            None => Ok(()),
        }
    }

    pub(crate) fn with_prices(&self, prices: Vec<PriceFunction>) -> Result<Game> {
        let markets = self
            .markets
            .iter()
            .zip(prices)
            .map(|(m, price)| Market {
                id: m.id.clone(),
                price,
            })
            .collect();
        Game::new(markets, self.firms.clone())
    }

    /// Multiplies every intercept, slope and cost coefficient by `alpha`.
    /// Equilibria are unchanged; profits, welfare and surplus scale by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Game> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale factor {alpha} must be > 0"
            )));
        }
        let prices = self
            .markets
            .iter()
            .map(|m| m.price.scaled(alpha))
            .collect::<Result<Vec<_>>>()?;
        let firms = self
            .firms
            .iter()
            .map(|f| Firm {
                cost: f.cost.scaled(alpha),
                ..f.clone()
            })
            .collect();
        Game::new(
            self.markets
                .iter()
                .zip(prices)
                .map(|(m, price)| Market {
                    id: m.id.clone(),
                    price,
                })
                .collect(),
            firms,
        )
    }

    /// Short stable fingerprint of the game's JSON form.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("game serialization is infallible");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("game serialization is infallible")
    }

    /// Parses the JSON game schema. Structural problems keep their own error variant
    /// rather than being folded into a JSON error.
    pub fn from_json(s: &str) -> Result<Game> {
        let raw: GameJson = serde_json::from_str(s)?;
        Game::try_from(raw)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketJson {
    id: MarketId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchors: Option<Vec<Anchor>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FirmJson {
    id: FirmId,
    markets: Vec<MarketId>,
    cost: CostSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameJson {
    markets: Vec<MarketJson>,
    firms: Vec<FirmJson>,
}

impl TryFrom<GameJson> for Game {
    type Error = Error;

    fn try_from(j: GameJson) -> Result<Self> {
        let markets = j
            .markets
            .into_iter()
            .map(|m| match (m.p, m.r, m.anchors) {
                (Some(p), Some(r), None) => Market::affine(m.id, p, r),
                (None, None, Some(anchors)) => {
                    Ok(Market::anchored(m.id, ConcaveAnchorPrice::new(anchors)?))
                }
                _ => Err(Error::InvalidMarket {
                    market: m.id.to_string(),
                    reason: "expected either `p` and `r`, or `anchors`".into(),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let firms = j
            .firms
            .into_iter()
            .map(|f| Firm::new(f.id, f.markets, f.cost))
            .collect();
        Game::new(markets, firms)
    }
}

impl From<Game> for GameJson {
    fn from(g: Game) -> Self {
        GameJson {
            markets: g
                .markets
                .into_iter()
                .map(|m| match m.price {
                    PriceFunction::Affine { p, r } => MarketJson {
                        id: m.id,
                        p: Some(p),
                        r: Some(r),
                        anchors: None,
                    },
                    PriceFunction::Anchored(c) => MarketJson {
                        id: m.id,
                        p: None,
                        r: None,
                        anchors: Some(c.anchors().to_vec()),
                    },
                })
                .collect(),
            firms: g
                .firms
                .into_iter()
                .map(|f| FirmJson {
                    id: f.id,
                    markets: f.markets,
                    cost: f.cost,
                })
                .collect(),
        }
    }
}
