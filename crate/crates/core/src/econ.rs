//! Price and average-cost models.
//!
//! The market price of a product falls with the total supply rate and with
//! the lead time customers have to wait:
//!
//! ```text
//! P(Λ, l) = ((a − b·l^γ)⁺ / Λ)^(1/(1−α))
//! ```
//!
//! With `b = 0` the lead-time term vanishes and the classic Cobb–Douglas
//! price `(k/Λ)^(1/(1−α))` with `k = a` is recovered. The average production
//! cost per job amortizes the capacity investment over the system lifetime:
//!
//! ```text
//! c(λ) = Σ_j r_j·μ_j / (λ·t) + v0
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Parameters of the price surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketModel {
    /// Demand-scale constant.
    pub a: f64,
    /// Lead-time sensitivity.
    pub b: f64,
    /// Lead-time exponent.
    pub gamma: f64,
    /// Cobb–Douglas exponent, strictly inside (0, 1).
    pub alpha: f64,
}

impl MarketModel {
    pub fn new(a: f64, b: f64, gamma: f64, alpha: f64) -> Result<Self> {
        let m = Self { a, b, gamma, alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [("a", self.a), ("b", self.b), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain { what, value: v });
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain {
                what: "alpha",
                value: self.alpha,
            });
        }
        Ok(())
    }

    /// `max(a − b·l^γ, 0)`.
    pub fn demand_scale(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0) {
            return Err(Error::Domain {
                what: "lead time",
                value: l,
            });
        }
        ensure_finite("lead time", l)?;
        Ok((self.a - self.b * l.powf(self.gamma)).max(0.0))
    }

    /// Price per job at total production rate `total_rate` and lead time `l`.
    ///
    /// Exactly zero once the lead time reaches the extinction point.
    pub fn price(&self, total_rate: f64, l: f64) -> Result<f64> {
        if !(total_rate > 0.0) {
            return Err(Error::Domain {
                what: "total production rate",
                value: total_rate,
            });
        }
        let scale = self.demand_scale(l)?;
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok((scale / total_rate).powf(1.0 / (1.0 - self.alpha)))
    }

    /// Lead time at which the demand scale reaches zero, `(a/b)^(1/γ)`.
    ///
    /// `None` when the price never vanishes (`b = 0` or `γ = 0` with `a > b`).
    pub fn extinction_lead_time(&self) -> Option<f64> {
        if self.b == 0.0 || self.gamma == 0.0 {
            return None;
        }
        Some((self.a / self.b).powf(1.0 / self.gamma))
    }
}

/// One station's capacity investment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    /// Unit capacity cost (currency per jobs/day).
    pub r: f64,
    /// Capacity in jobs/day.
    pub mu: f64,
}

/// Cost structure of a production system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub stations: Vec<Station>,
    /// Variable cost per job.
    pub v0: f64,
    /// System lifetime in days.
    pub lifetime: f64,
}

impl CostModel {
    pub fn new(stations: Vec<Station>, v0: f64, lifetime: f64) -> Result<Self> {
        let c = Self { stations, v0, lifetime };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.stations {
            if !(s.r.is_finite() && s.r >= 0.0) {
                return Err(Error::Domain {
                    what: "unit capacity cost",
                    value: s.r,
                });
            }
            if !(s.mu.is_finite() && s.mu > 0.0) {
                return Err(Error::Domain {
                    what: "station capacity",
                    value: s.mu,
                });
            }
        }
        if !(self.v0.is_finite() && self.v0 >= 0.0) {
            return Err(Error::Domain {
                what: "variable cost",
                value: self.v0,
            });
        }
        if !(self.lifetime.is_finite() && self.lifetime > 0.0) {
            return Err(Error::Domain {
                what: "lifetime",
                value: self.lifetime,
            });
        }
        Ok(())
    }

    /// Total capacity investment `Σ r_j·μ_j`.
    pub fn capital(&self) -> f64 {
        self.stations.iter().map(|s| s.r * s.mu).sum()
    }

    /// Average production cost per job at production rate `lambda`.
    pub fn avg_cost(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain {
                what: "production rate",
                value: lambda,
            });
        }
        Ok(self.capital() / (lambda * self.lifetime) + self.v0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn demand_scale_examples() {
        let m = MarketModel::new(3000.0, 1.0, 3.0, 0.3).unwrap();
        assert_eq!(m.demand_scale(0.0).unwrap(), 3000.0);
        assert_eq!(m.demand_scale(20.0).unwrap(), 0.0);
        let m = MarketModel::new(3000.0, 1.0, 0.8, 0.3).unwrap();
        // 3000 − 5^0.8, evaluated at 40 digits
        assert!(rel(m.demand_scale(5.0).unwrap(), 2_996.376_101_681_611_5) < 1e-14);
    }

    #[test]
    fn negative_lead_time_is_rejected() {
        let m = MarketModel::new(3000.0, 1.0, 3.0, 0.3).unwrap();
        assert!(matches!(m.demand_scale(-1.0), Err(Error::Domain { .. })));
        assert!(m.price(10.0, -0.5).is_err());
    }

    #[test]
    fn price_examples() {
        let m = MarketModel::new(3000.0, 1.0, 3.0, 0.3).unwrap();
        // (2875/100)^(1/0.7), evaluated at 40 digits
        assert!(rel(m.price(100.0, 5.0).unwrap(), 121.27418249689638) < 1e-13);
        let l_star = 3000f64.powf(1.0 / 3.0);
        assert_eq!(m.price(100.0, l_star + 1e-9).unwrap(), 0.0);
        assert_eq!(m.price(100.0, 50.0).unwrap(), 0.0);
        assert!(m.price(0.0, 1.0).is_err());
        assert!(m.price(-3.0, 1.0).is_err());
    }

    #[test]
    fn b_zero_recovers_cobb_douglas() {
        let k = 1234.5;
        let m = MarketModel::new(k, 0.0, 3.0, 0.3).unwrap();
        let expected = (k / 40.0f64).powf(1.0 / 0.7);
        for l in [0.0, 1.0, 7.5, 1e6] {
            assert_eq!(m.price(40.0, l).unwrap(), expected);
        }
    }

    #[test]
    fn avg_cost_examples() {
        let c = CostModel::new(vec![Station { r: 100.0, mu: 10.0 }], 5.0, 1000.0).unwrap();
        assert!((c.avg_cost(8.0).unwrap() - 5.125).abs() < 1e-15);
        assert!((c.avg_cost(1e15).unwrap() - 5.0).abs() < 1e-9);
        let free = CostModel::new(vec![Station { r: 0.0, mu: 3.0 }], 5.0, 10.0).unwrap();
        assert_eq!(free.avg_cost(0.01).unwrap(), 5.0);
        assert!(c.avg_cost(0.0).is_err());
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(MarketModel::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(MarketModel::new(1.0, -1.0, 1.0, 0.5).is_err());
        assert!(CostModel::new(vec![Station { r: 1.0, mu: 0.0 }], 0.0, 1.0).is_err());
        assert!(CostModel::new(vec![], 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn price_is_nonincreasing_in_lead_time_and_rate(
            a in 0.0f64..1e4, b in 0.0f64..10.0, gamma in 0.0f64..4.0, alpha in 0.05f64..0.95,
            rate in 0.1f64..1e3, l1 in 0.0f64..50.0, dl in 0.0f64..50.0, dr in 0.0f64..100.0,
        ) {
            let m = MarketModel::new(a, b, gamma, alpha).unwrap();
            let p = m.price(rate, l1).unwrap();
            prop_assert!(m.price(rate, l1 + dl).unwrap() <= p);
            prop_assert!(m.price(rate + dr, l1).unwrap() <= p);
        }

        #[test]
        fn avg_cost_strictly_decreasing(r in 0.01f64..1e3, mu in 0.1f64..100.0, l1 in 0.1f64..100.0, dl in 0.01f64..100.0) {
            let c = CostModel::new(vec![Station { r, mu }], 1.0, 365.0).unwrap();
            prop_assert!(c.avg_cost(l1 + dl).unwrap() < c.avg_cost(l1).unwrap());
        }

        #[test]
        fn demand_scale_vanishes_at_extinction_point(a in 1.0f64..1e4, b in 0.01f64..10.0, gamma in 0.2f64..4.0) {
            let m = MarketModel::new(a, b, gamma, 0.3).unwrap();
            let l_star = m.extinction_lead_time().unwrap();
            prop_assert!(m.demand_scale(l_star * (1.0 - 1e-6)).unwrap() > 0.0);
            prop_assert_eq!(m.demand_scale(l_star * (1.0 + 1e-9)).unwrap(), 0.0);
            prop_assert!(m.demand_scale(l_star).unwrap() <= a * 1e-12);
        }
    }
}
