//! Cournot equilibria of affine games and their KKT certificate.
//!
//! Two iteration schemes are available. [`Method::Aggregate`] iterates on the prices
//! of the sloped markets: for trial prices every firm's reply is a one-dimensional
//! allocation problem, and each market's price is the root of excess supply. It needs a
//! number of sweeps that does not grow with the number of firms. [`Method::RoundRobin`]
//! is plain damped Gauss–Seidel best-response dynamics on quantities.
//!
//! Either way the answer is accepted only once the KKT residual is below `kkt_tol`.

mod response;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{resolve_deltas, Game, Layout, PriceShock, QuantityProfile};
use response::{absorbing_slots, allocate, best_response_at, bisect, lanes_for, unbounded, Lane};

pub use response::best_response;

/// Quantities at or below this count as zero in the complementarity check.
pub const Q_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Market-price fixed point with per-firm replies.
    #[default]
    Aggregate,
    /// Damped round-robin best responses on quantities.
    RoundRobin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Sup-norm change between sweeps below which the iteration may stop.
    pub tol: f64,
    pub kkt_tol: f64,
    /// Weight `ω ∈ (0, 1]` of the new iterate.
    pub damping: f64,
    pub max_iters: usize,
    pub initial: Option<QuantityProfile>,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            kkt_tol: 1e-8,
            damping: 1.0,
            max_iters: 10_000,
            initial: None,
            method: Method::default(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol {} must be > 0",
                self.tol
            )));
        }
        if !(self.kkt_tol.is_finite() && self.kkt_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kkt_tol {} must be > 0",
                self.kkt_tol
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping {} must be in (0, 1]",
                self.damping
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub profile: QuantityProfile,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

/// Solves for the Cournot equilibrium of `game` shifted by `shock`.
pub fn solve_equilibrium(
    game: &Game,
    shock: Option<&PriceShock>,
    opts: &SolveOptions,
) -> Result<EquilibriumResult> {
    opts.validate()?;
    game.require_affine()?;
    let deltas = resolve_deltas(game, shock)?;
    let start = match &opts.initial {
        Some(p) => p.feasible_layout(game)?,
        None => QuantityProfile::zeros(game).layout(game)?,
    };
    let mut solver = Solver::new(game, deltas);
    let (layout, iterations) = match opts.method {
        Method::RoundRobin => solver.round_robin(start, opts)?,
        Method::Aggregate => solver.aggregate(start, opts)?,
    };
    let kkt_residual = residual_at(game, &layout, &solver.deltas);
    Ok(EquilibriumResult {
        profile: QuantityProfile::from_layout(game, &layout),
        iterations,
        kkt_residual,
        converged: true,
    })
}

struct Solver<'g> {
    game: &'g Game,
    deltas: Vec<f64>,
    absorbing: Vec<Option<usize>>,
    lanes: Vec<Lane>,
}

fn sup_change(old: &[Vec<f64>], new: &[Vec<f64>]) -> f64 {
    old.iter()
        .flatten()
        .zip(new.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

impl<'g> Solver<'g> {
    fn new(game: &'g Game, deltas: Vec<f64>) -> Self {
        let absorbing = absorbing_slots(game, &deltas);
        Solver {
            game,
            deltas,
            absorbing,
            lanes: Vec::new(),
        }
    }

    fn stop(&self, iterations: usize, change: f64, layout: &[Vec<f64>]) -> Error {
        Error::NonConvergence {
            iterations,
            change,
            residual: residual_at(self.game, layout, &self.deltas),
        }
    }

    fn round_robin(&mut self, mut layout: Layout, opts: &SolveOptions) -> Result<(Layout, usize)> {
        let game = self.game;
        let omega = opts.damping;
        let mut totals = game.market_totals(&layout);
        let mut reply = Vec::new();
        let mut change = f64::INFINITY;
        for iter in 1..=opts.max_iters {
            change = 0.0;
            for i in 0..game.n_firms() {
                reply.clear();
                reply.resize(layout[i].len(), 0.0);
                best_response_at(
                    game,
                    i,
                    &layout,
                    &totals,
                    &self.deltas,
                    self.absorbing[i],
                    &mut self.lanes,
                    &mut reply,
                )?;
                for (slot, &target) in reply.iter().enumerate() {
                    let old = layout[i][slot];
                    let new = if omega == 1.0 {
                        target
                    } else {
                        (1.0 - omega) * old + omega * target
                    };
                    change = f64::max(change, (new - old).abs());
                    totals[game.slots(i)[slot]] += new - old;
                    layout[i][slot] = new;
                }
            }
            // Incremental updates of the totals drift; refresh once per sweep.
            totals = game.market_totals(&layout);
            if change < opts.tol && residual_at(game, &layout, &self.deltas) <= opts.kkt_tol {
                return Ok((layout, iter));
            }
        }
        Err(self.stop(opts.max_iters, change, &layout))
    }

    /// Firm `i`'s reply when sloped markets trade at `prices` (shocked intercept included).
    fn reply(&mut self, i: usize, prices: &[f64], out: &mut [f64]) -> Result<()> {
        let game = self.game;
        lanes_for(
            game,
            i,
            &self.deltas,
            self.absorbing[i],
            |m, _| {
                let (_, r) = game.markets()[m]
                    .affine_coefficients()
                    .expect("affine game");
                (prices[m], r)
            },
            &mut self.lanes,
        );
        allocate(game.firms()[i].cost_spec(), &self.lanes, out)
            .map_err(|slot| unbounded(game, i, slot))?;
        Ok(())
    }

    /// Price on market `m` at which the firms' replies clear demand, other prices fixed.
    fn clearing_price(&mut self, m: usize, prices: &mut [f64], buf: &mut Vec<f64>) -> Result<f64> {
        let game = self.game;
        let (p, r) = game.markets()[m]
            .affine_coefficients()
            .expect("affine game");
        let top = p + self.deltas[m];
        if game.access(m).is_empty() || top <= 0.0 {
            return Ok(top.max(0.0));
        }
        let mut failure = None;
        let saved = prices[m];
        let root = bisect(0.0, top, top, |price| {
            if failure.is_some() {
                return true;
            }
            prices[m] = price;
            let mut supply = 0.0;
            for &(i, slot) in game.access(m) {
                buf.clear();
                buf.resize(game.slots(i).len(), 0.0);
                if let Err(e) = self.reply(i, prices, buf) {
                    failure = Some(e);
                    return true;
                }
                supply += buf[slot];
            }
            supply >= (top - price) / r
        });
        prices[m] = saved;
        match failure {
            Some(e) => Err(e),
            None => Ok(root),
        }
    }

    fn aggregate(&mut self, start: Layout, opts: &SolveOptions) -> Result<(Layout, usize)> {
        let game = self.game;
        let omega = opts.damping;
        let totals = game.market_totals(&start);
        let sloped: Vec<usize> = (0..game.markets().len())
            .filter(|&m| !game.markets()[m].is_constant_price())
            .collect();
        let mut prices: Vec<f64> = (0..game.markets().len())
            .map(|m| {
                let (p, r) = game.markets()[m]
                    .affine_coefficients()
                    .expect("affine game");
                let top = p + self.deltas[m];
                (top - r * totals[m]).clamp(0.0, top.max(0.0))
            })
            .collect();

        let mut layout = start;
        let mut next: Layout = layout.clone();
        let mut buf = Vec::new();
        let mut change = f64::INFINITY;
        for iter in 1..=opts.max_iters {
            for &m in &sloped {
                let target = self.clearing_price(m, &mut prices, &mut buf)?;
                prices[m] = if omega == 1.0 {
                    target
                } else {
                    (1.0 - omega) * prices[m] + omega * target
                };
            }
            for (i, row) in next.iter_mut().enumerate() {
                self.reply(i, &prices, row)?;
            }
            change = sup_change(&layout, &next);
            std::mem::swap(&mut layout, &mut next);
            if change < opts.tol && residual_at(game, &layout, &self.deltas) <= opts.kkt_tol {
                return Ok((layout, iter));
            }
        }
        Err(self.stop(opts.max_iters, change, &layout))
    }
}

/// Largest violation of the per-firm KKT conditions at `profile`.
///
/// For served markets this is `|π_{i,m} − c_i′(q_i) − μ_i|`, for unserved ones
/// `max(0, π_{i,m} − c_i′(q_i) − μ_i)`, where the capacity multiplier `μ_i` is the
/// largest positive excess of marginal revenue over marginal cost on a served market
/// when the firm is at capacity, and zero otherwise. Works for concave anchor prices.
pub fn kkt_residual(
    game: &Game,
    profile: &QuantityProfile,
    shock: Option<&PriceShock>,
) -> Result<f64> {
    let layout = profile.feasible_layout(game)?;
    let deltas = resolve_deltas(game, shock)?;
    Ok(residual_at(game, &layout, &deltas))
}

pub(crate) fn residual_at(game: &Game, layout: &[Vec<f64>], deltas: &[f64]) -> f64 {
    let totals = game.market_totals(layout);
    let mut worst = 0.0_f64;
    for (i, row) in layout.iter().enumerate() {
        let cost = game.firms()[i].cost_spec();
        let q_i: f64 = row.iter().sum();
        let mc = cost.marginal_unchecked(q_i);
        let gaps: Vec<f64> = (0..row.len())
            .map(|slot| game.marginal_revenue_at(i, slot, layout, &totals, deltas) - mc)
            .collect();
        let at_cap = cost.cap().is_some_and(|cap| q_i >= cap - Q_TOL);
        let mu = if at_cap {
            row.iter()
                .zip(&gaps)
                .filter(|(q, _)| **q > Q_TOL)
                .map(|(_, g)| *g)
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        for (q, gap) in row.iter().zip(&gaps) {
            let violation = if *q > Q_TOL {
                (gap - mu).abs()
            } else {
                (gap - mu).max(0.0)
            };
            worst = worst.max(violation);
        }
    }
    worst
}
