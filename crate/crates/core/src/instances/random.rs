use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostSpec, Firm, Game, Market, PriceShock};

/// Parameters of the random affine game generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomGameConfig {
    pub n_max: usize,
    pub m_max: usize,
    pub p_range: (f64, f64),
    pub r_range: (f64, f64),
    /// Relative weights of zero, linear and quadratic costs.
    pub cost_weights: [f64; 3],
    pub a_max: f64,
    pub b_max: f64,
    pub cap_probability: f64,
    pub cap_range: (f64, f64),
    /// Probability that one firm additionally gets a private constant-price market.
    pub monopoly_probability: f64,
    /// Probability that a market is hit by the random shock.
    pub shock_probability: f64,
}

impl Default for RandomGameConfig {
    fn default() -> Self {
        RandomGameConfig {
            n_max: 6,
            m_max: 4,
            p_range: (1.0, 100.0),
            r_range: (0.1, 10.0),
            cost_weights: [1.0, 1.0, 1.0],
            a_max: 2.0,
            b_max: 20.0,
            cap_probability: 0.3,
            cap_range: (0.5, 10.0),
            monopoly_probability: 0.5,
            shock_probability: 0.5,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} = ({lo}, {hi}) is not a valid range"
        )))
    }
}

fn check_probability(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} = {x} is not a probability"
        )))
    }
}

impl RandomGameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 || self.m_max == 0 {
            return Err(Error::InvalidArgument(
                "n_max and m_max must be at least 1".into(),
            ));
        }
        check_range("p_range", self.p_range, 0.0)?;
        check_range("r_range", self.r_range, 0.0)?;
        if self.r_range.0 <= 0.0 {
            return Err(Error::InvalidArgument(
                "shared markets need a positive slope".into(),
            ));
        }
        check_range("cap_range", self.cap_range, 0.0)?;
        if self.cap_range.0 <= 0.0 {
            return Err(Error::InvalidArgument("capacities must be positive".into()));
        }
        if !self.cost_weights.iter().all(|w| w.is_finite() && *w >= 0.0)
            || self.cost_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidArgument(
                "cost weights must be >= 0 with a positive sum".into(),
            ));
        }
        if !(self.a_max.is_finite()
            && self.a_max >= 0.0
            && self.b_max.is_finite()
            && self.b_max >= 0.0)
        {
            return Err(Error::InvalidArgument(
                "a_max and b_max must be finite and >= 0".into(),
            ));
        }
        check_probability("cap_probability", self.cap_probability)?;
        check_probability("monopoly_probability", self.monopoly_probability)?;
        check_probability("shock_probability", self.shock_probability)
    }

    /// Short stable fingerprint of the configuration.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serialization is infallible");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn random_cost(rng: &mut ChaCha8Rng, cfg: &RandomGameConfig) -> CostSpec {
    let total: f64 = cfg.cost_weights.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    let mut kind = 2;
    for (k, w) in cfg.cost_weights.iter().enumerate() {
        if pick < *w {
            kind = k;
            break;
        }
        pick -= w;
    }
    let cost = match kind {
        0 => CostSpec::zero(),
        1 => CostSpec::linear(uniform(rng, (0.0, cfg.b_max))).expect("sampled in range"),
        _ => CostSpec::quadratic(
            uniform(rng, (0.0, cfg.a_max)),
            uniform(rng, (0.0, cfg.b_max)),
        )
        .expect("sampled in range"),
    };
    if rng.gen_bool(cfg.cap_probability) {
        cost.with_cap(uniform(rng, cfg.cap_range))
            .expect("sampled in range")
    } else {
        cost
    }
}

/// A random affine game, deterministic in `seed`.
///
/// Shared markets have slope in `r_range`; every firm serves a nonempty random subset
/// of them and every shared market has at least one firm. With `monopoly_probability`
/// one firm also gets a private constant-price market, in which case that firm is
/// given a capacity if its cost is not strictly convex so the game stays bounded.
pub fn random_game(seed: u64, cfg: &RandomGameConfig) -> Result<Game> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=cfg.n_max);
    let monopoly = cfg.m_max >= 2 && rng.gen_bool(cfg.monopoly_probability);
    let shared = rng.gen_range(1..=cfg.m_max - usize::from(monopoly));

    let offset = usize::from(monopoly);
    let mut markets = Vec::with_capacity(shared + offset);
    if monopoly {
        markets.push(Market::affine("m1", uniform(&mut rng, cfg.p_range), 0.0)?);
    }
    for k in 0..shared {
        markets.push(Market::affine(
            format!("m{}", k + 1 + offset),
            uniform(&mut rng, cfg.p_range),
            uniform(&mut rng, cfg.r_range),
        )?);
    }

    let mut access: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let size = rng.gen_range(1..=shared);
            let mut picked = sample(&mut rng, shared, size).into_vec();
            picked.sort_unstable();
            picked
        })
        .collect();
    for k in 0..shared {
        if !access.iter().any(|a| a.contains(&k)) {
            let i = rng.gen_range(0..n);
            access[i].push(k);
            access[i].sort_unstable();
        }
    }

    let monopolist = monopoly.then(|| rng.gen_range(0..n));
    let mut firms = Vec::with_capacity(n);
    for (i, own) in access.iter().enumerate() {
        let mut cost = random_cost(&mut rng, cfg);
        let mut ids: Vec<String> = Vec::new();
        if monopolist == Some(i) {
            ids.push("m1".into());
            if !cost.is_strictly_convex() && cost.cap().is_none() {
                cost = cost.with_cap(uniform(&mut rng, cfg.cap_range))?;
            }
        }
        ids.extend(own.iter().map(|k| format!("m{}", k + 1 + offset)));
        firms.push(Firm::new(format!("f{}", i + 1), ids, cost));
    }
    Game::new(markets, firms)
}

/// A random nonnegative shock with `δ_m ∈ [0, p_m]` on each market hit (affine games).
pub fn random_shock(seed: u64, game: &Game, cfg: &RandomGameConfig) -> Result<PriceShock> {
    game.require_affine()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let mut deltas = Vec::new();
    for market in game.markets() {
        let (p, _) = market.affine_coefficients().expect("affine game");
        if rng.gen_bool(cfg.shock_probability) {
            deltas.push((market.id().clone(), uniform(&mut rng, (0.0, p))));
        }
    }
    PriceShock::new(deltas)
}
