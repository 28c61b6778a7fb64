//! Closed-form evaluation of prices, marginal revenues, profits, welfare and surplus.

use super::game::{Game, PriceFunction};
use super::profile::{resolve_deltas, PriceShock, QuantityProfile, ShockSign};
use crate::error::{Error, Result};

impl Game {
    /// Price on `market` at total quantity `q_m`: `p_m + δ_m − r_m·q_m` for affine markets.
    pub fn price(&self, market: &str, q_m: f64, shock: Option<&PriceShock>) -> Result<f64> {
        let m = self.market_idx(market)?;
        if q_m.is_nan() || q_m < 0.0 {
            return Err(Error::NegativeQuantity(q_m));
        }
        let delta = shock.map_or(0.0, |s| s.get(market));
        Ok(self.price_at(m, q_m, delta))
    }

    /// Marginal revenue `π_{i,m} = p_m(q_m) + δ_m + p_m′(q_m)·q_{i,m}`.
    pub fn marginal_revenue(
        &self,
        firm: &str,
        market: &str,
        profile: &QuantityProfile,
        shock: Option<&PriceShock>,
    ) -> Result<f64> {
        let i = self.firm_idx(firm)?;
        let m = self.market_idx(market)?;
        let slot = self
            .slots(i)
            .iter()
            .position(|&k| k == m)
            .ok_or_else(|| Error::NoAccess {
                firm: firm.to_owned(),
                market: market.to_owned(),
            })?;
        let layout = profile.layout(self)?;
        let totals = self.market_totals(&layout);
        let deltas = resolve_deltas(self, shock)?;
        Ok(self.marginal_revenue_at(i, slot, &layout, &totals, &deltas))
    }

    /// `u_i(q) = Σ_m price_m(q_m)·q_{i,m} − c_i(q_i)`.
    pub fn profit(
        &self,
        firm: &str,
        profile: &QuantityProfile,
        shock: Option<&PriceShock>,
    ) -> Result<f64> {
        let i = self.firm_idx(firm)?;
        let layout = profile.feasible_layout(self)?;
        let totals = self.market_totals(&layout);
        let deltas = resolve_deltas(self, shock)?;
        Ok(self.profit_at(i, &layout, &totals, &deltas))
    }

    /// Every firm's profit, in firm order.
    pub fn profits(
        &self,
        profile: &QuantityProfile,
        shock: Option<&PriceShock>,
    ) -> Result<Vec<f64>> {
        let layout = profile.feasible_layout(self)?;
        let totals = self.market_totals(&layout);
        let deltas = resolve_deltas(self, shock)?;
        Ok((0..self.n_firms())
            .map(|i| self.profit_at(i, &layout, &totals, &deltas))
            .collect())
    }

    /// Total profit `U(q)` of all firms.
    pub fn welfare(&self, profile: &QuantityProfile, shock: Option<&PriceShock>) -> Result<f64> {
        Ok(self.profits(profile, shock)?.iter().sum())
    }

    /// Social surplus `Σ_m (p_m+δ_m)·q_m − r_m·q_m²/2 − Σ_i c_i(q_i)`; affine prices only.
    pub fn surplus(&self, profile: &QuantityProfile, shock: Option<&PriceShock>) -> Result<f64> {
        self.require_affine()?;
        let layout = profile.feasible_layout(self)?;
        let deltas = resolve_deltas(self, shock)?;
        Ok(self.surplus_at(&layout, &deltas))
    }

    /// The shocked game `G(δ)`: intercepts move by `δ_m`, everything else is kept.
    pub fn apply_shock(&self, shock: &PriceShock) -> Result<Game> {
        let deltas = shock.deltas(self)?;
        let prices = self
            .markets()
            .iter()
            .zip(&deltas)
            .map(|(market, &d)| {
                if let (ShockSign::Negative, PriceFunction::Affine { p, .. }) =
                    (shock.sign(), market.price_function())
                {
                    if p + d < 0.0 {
                        return Err(Error::InvalidShock {
                            market: market.id().to_string(),
                            reason: format!("intercept {p} would become {}", p + d),
                        });
                    }
                }
                if d == 0.0 {
                    Ok(market.price_function().clone())
                } else {
                    market.price_function().shifted(d)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_prices(prices)
    }

    pub(crate) fn price_at(&self, m: usize, q_m: f64, delta: f64) -> f64 {
        self.markets()[m].price_function().value(q_m) + delta
    }

    pub(crate) fn market_totals(&self, layout: &[Vec<f64>]) -> Vec<f64> {
        let mut totals = vec![0.0; self.markets().len()];
        for (i, row) in layout.iter().enumerate() {
            for (&m, &q) in self.slots(i).iter().zip(row) {
                totals[m] += q;
            }
        }
        totals
    }

    pub(crate) fn marginal_revenue_at(
        &self,
        i: usize,
        slot: usize,
        layout: &[Vec<f64>],
        totals: &[f64],
        deltas: &[f64],
    ) -> f64 {
        let m = self.slots(i)[slot];
        let price = self.markets()[m].price_function();
        price.value(totals[m]) + deltas[m] + price.slope(totals[m]) * layout[i][slot]
    }

    pub(crate) fn profit_at(
        &self,
        i: usize,
        layout: &[Vec<f64>],
        totals: &[f64],
        deltas: &[f64],
    ) -> f64 {
        let row = &layout[i];
        let revenue: f64 = self
            .slots(i)
            .iter()
            .zip(row)
            .map(|(&m, &q)| self.price_at(m, totals[m], deltas[m]) * q)
            .sum();
        let total: f64 = row.iter().sum();
        revenue - self.firms()[i].cost_spec().value_unchecked(total)
    }

    pub(crate) fn surplus_at(&self, layout: &[Vec<f64>], deltas: &[f64]) -> f64 {
        let totals = self.market_totals(layout);
        let gross: f64 = self
            .markets()
            .iter()
            .zip(totals.iter().zip(deltas))
            .map(|(market, (&q, &d))| {
                let (p, r) = market.affine_coefficients().expect("affine game");
                (p + d) * q - 0.5 * r * q * q
            })
            .sum();
        let costs: f64 = self
            .firms()
            .iter()
            .zip(layout)
            .map(|(f, row)| f.cost_spec().value_unchecked(row.iter().sum()))
            .sum();
        gross - costs
    }
}

#[cfg(test)]
mod tests {
    use crate::instances::{bulow_example, welfare_worstcase};
    use crate::model::{PriceShock, QuantityProfile};

    fn bulow_profiles() -> (crate::Game, QuantityProfile, QuantityProfile, PriceShock) {
        let inst = bulow_example();
        let x = inst.stated_pre.clone().unwrap();
        let y = inst.stated_post.clone().unwrap();
        (inst.game, x, y, inst.shock)
    }

    #[test]
    fn bulow_prices() {
        let (g, _, _, shock) = bulow_profiles();
        assert_eq!(g.price("m2", 100.0, None).unwrap(), 100.0);
        assert_eq!(g.price("m1", 17.0, Some(&shock)).unwrap(), 55.0);
        assert_eq!(g.price("m2", 0.0, None).unwrap(), 200.0);
        assert!(g.price("m9", 0.0, None).is_err());
    }

    #[test]
    fn bulow_marginal_revenues() {
        let (g, x, y, shock) = bulow_profiles();
        assert_eq!(g.marginal_revenue("a", "m2", &x, None).unwrap(), 50.0);
        assert_eq!(
            g.marginal_revenue("b", "m2", &y, Some(&shock)).unwrap(),
            51.0
        );
        assert_eq!(
            g.marginal_revenue("a", "m1", &y, Some(&shock)).unwrap(),
            55.0
        );
        assert!(g.marginal_revenue("b", "m1", &x, None).is_err());
    }

    #[test]
    fn marginal_revenue_matches_revenue_gradient() {
        let (g, _, y, shock) = bulow_profiles();
        let h = 1e-4;
        let revenue = |qa2: f64| {
            let mut p = y.clone();
            p.set(&g, "a".into(), "m2".into(), qa2).unwrap();
            g.price("m2", p.market_total("m2"), Some(&shock)).unwrap() * qa2
        };
        let fd = (revenue(47.0 + h) - revenue(47.0 - h)) / (2.0 * h);
        let mr = g.marginal_revenue("a", "m2", &y, Some(&shock)).unwrap();
        assert!((fd - mr).abs() < 1e-6);
    }

    #[test]
    fn bulow_profits() {
        let (g, x, y, shock) = bulow_profiles();
        assert_eq!(g.profit("a", &x, None).unwrap(), 3750.0);
        assert_eq!(g.profit("b", &x, None).unwrap(), 3750.0);
        assert_eq!(g.profit("a", &y, Some(&shock)).unwrap(), 3721.5);
        assert_eq!(g.profit("b", &y, Some(&shock)).unwrap(), 3901.5);
        assert_eq!(g.welfare(&x, None).unwrap(), 7500.0);
        let zero = QuantityProfile::zeros(&g);
        assert_eq!(g.profit("a", &zero, None).unwrap(), 0.0);
        assert_eq!(g.welfare(&zero, None).unwrap(), 0.0);
        assert_eq!(g.surplus(&zero, None).unwrap(), 0.0);
    }

    #[test]
    fn welfare_instance_values() {
        let inst = welfare_worstcase(2).unwrap();
        let x = inst.stated_pre.as_ref().unwrap();
        let y = inst.stated_post.as_ref().unwrap();
        assert!((inst.game.welfare(x, None).unwrap() - 1.0).abs() < 1e-15);
        assert!((inst.game.surplus(x, None).unwrap() - 1.5).abs() < 1e-15);
        let s = inst.game.surplus(y, Some(&inst.shock)).unwrap();
        assert!((s - 271.0 / 200.0).abs() < 1e-14, "{s}");
    }

    #[test]
    fn infeasible_profiles_are_rejected() {
        let inst = welfare_worstcase(3).unwrap();
        let mut p = QuantityProfile::zeros(&inst.game);
        p.set(&inst.game, "a".into(), "m2".into(), 1.5).unwrap();
        assert!(inst.game.profit("a", &p, None).is_err());
        p.set(&inst.game, "a".into(), "m2".into(), -0.5).unwrap();
        assert!(inst.game.welfare(&p, None).is_err());
    }

    #[test]
    fn apply_shock_shifts_intercepts_only() {
        let (g, _, _, shock) = bulow_profiles();
        let shocked = g.apply_shock(&shock).unwrap();
        assert_eq!(
            shocked.market("m1").unwrap().affine_coefficients(),
            Some((55.0, 0.0))
        );
        assert_eq!(
            shocked.market("m2").unwrap().affine_coefficients(),
            Some((200.0, 1.0))
        );
        assert_eq!(
            g.market("m1").unwrap().affine_coefficients(),
            Some((50.0, 0.0))
        );
        assert_eq!(g.apply_shock(&PriceShock::zero()).unwrap(), g);

        let inst = crate::instances::profit_worstcase(2).unwrap();
        let shocked = inst.game.apply_shock(&inst.shock).unwrap();
        assert_eq!(
            shocked.market("m1").unwrap().affine_coefficients(),
            Some((0.25, 0.0))
        );
    }

    #[test]
    fn shock_errors() {
        let (g, _, _, _) = bulow_profiles();
        let unknown = PriceShock::new([("m7", 1.0)]).unwrap();
        assert!(g.apply_shock(&unknown).is_err());
        let too_negative = PriceShock::negative([("m1", -60.0)]).unwrap();
        assert!(g.apply_shock(&too_negative).is_err());
        assert!(PriceShock::new([("m1", -1.0)]).is_err());
        assert!(serde_json::from_str::<PriceShock>(r#"{"m1":-1.0}"#).is_err());
    }

    #[test]
    fn surplus_rejects_concave_prices() {
        let inst = crate::instances::concave_small_shock(4).unwrap();
        let x = inst.stated_pre.as_ref().unwrap();
        assert!(matches!(
            inst.game.surplus(x, None),
            Err(crate::Error::UnsupportedPrice(_))
        ));
        assert!((inst.game.profit("a", x, None).unwrap() - 1.0).abs() < 1e-15);
    }
}
