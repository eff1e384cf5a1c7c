//! The system performance curve: mean sojourn time as a function of
//! throughput for a line of single-server stations, and its inverse.
//!
//! The line is summarized by its bottleneck (rate `mu`, variability `k1`)
//! and a composite of all other stations (variability `k2`, effective
//! capacity `k3`):
//!
//! ```text
//! l(λ) = k1·ρ/(1−ρ)·1/μ + k2·λ/(k3−λ)·1/k3 + PT_f,    ρ = λ/μ
//! ```
//!
//! Clearing denominators turns `l(λ) = l` into a quadratic `Aλ² + Bλ + C = 0`.
//! Exactly one root lies in the stability interval `[0, min(μ, k3))` when
//! `k1 + k2 > 0`, and that is the one returned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative width below zero within which a negative discriminant is treated as 0.
const DISCRIMINANT_SLACK: f64 = 1e-9;
const DEGENERATE_A: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowLineParams {
    /// Bottleneck service rate, jobs/day.
    pub mu: f64,
    /// Bottleneck variability.
    pub k1: f64,
    /// Composite-station variability.
    pub k2: f64,
    /// Composite-station effective capacity, jobs/day.
    pub k3: f64,
    /// Expected total process time, days.
    pub pt_f: f64,
}

impl FlowLineParams {
    pub fn new(mu: f64, k1: f64, k2: f64, k3: f64, pt_f: f64) -> Result<Self> {
        let p = Self { mu, k1, k2, k3, pt_f };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("mu", self.mu), ("k3", self.k3), ("pt_f", self.pt_f)];
        for (what, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain { what, value: v });
            }
        }
        for (what, v) in [("k1", self.k1), ("k2", self.k2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(())
    }

    /// Upper end of the stability interval, `min(μ, k3)`.
    pub fn capacity(&self) -> f64 {
        self.mu.min(self.k3)
    }

    /// Mean sojourn time at throughput `lambda`.
    pub fn sojourn(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain {
                what: "throughput",
                value: lambda,
            });
        }
        let cap = self.capacity();
        if lambda >= cap {
            return Err(Error::Unstable { lambda, capacity: cap });
        }
        let rho = lambda / self.mu;
        let bottleneck = self.k1 * (rho / (1.0 - rho)) / self.mu;
        let composite = self.k2 * (lambda / (self.k3 - lambda)) / self.k3;
        Ok(bottleneck + composite + self.pt_f)
    }

    /// Coefficients `(A, B, C)` of the quadratic whose roots invert the curve.
    ///
    /// Written in terms of the excess `l − PT_f` so that the constant term
    /// does not suffer cancellation when `l` is close to `PT_f`.
    pub fn quadratic(&self, l: f64) -> (f64, f64, f64) {
        let d = l - self.pt_f;
        let (mu, k1, k2, k3) = (self.mu, self.k1, self.k2, self.k3);
        let a = d + k1 / mu + k2 / k3;
        let b = -d * (mu + k3) - k1 * k3 / mu - mu * k2 / k3;
        let c = d * mu * k3;
        (a, b, c)
    }

    /// Both real roots of the inversion quadratic (NaN when complex).
    pub fn quadratic_roots(&self, l: f64) -> (f64, f64) {
        let (a, b, c) = self.quadratic(l);
        if a.abs() < DEGENERATE_A {
            let r = -c / b;
            return (r, r);
        }
        let scale = (b * b).max((4.0 * a * c).abs());
        let mut disc = b.mul_add(b, -4.0 * a * c);
        if disc < 0.0 && disc > -DISCRIMINANT_SLACK * scale {
            disc = 0.0;
        }
        if disc < 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return (0.0, 0.0);
        }
        (q / a, c / q)
    }

    /// Throughput at which the mean sojourn time equals `l`.
    pub fn throughput_for_sojourn(&self, l: f64) -> Result<f64> {
        if !l.is_finite() {
            return Err(Error::Domain {
                what: "sojourn time",
                value: l,
            });
        }
        if l < self.pt_f {
            return Err(Error::InfeasibleSojourn { l, pt_f: self.pt_f });
        }
        if l == self.pt_f {
            return Ok(0.0);
        }
        let cap = self.capacity();
        let (r1, r2) = self.quadratic_roots(l);
        let root = [r1, r2]
            .into_iter()
            .filter(|r| (0.0..cap).contains(r))
            .min_by(|x, y| {
                let ex = (self.sojourn(*x).unwrap_or(f64::INFINITY) - l).abs();
                let ey = (self.sojourn(*y).unwrap_or(f64::INFINITY) - l).abs();
                ex.total_cmp(&ey)
            })
            .ok_or(Error::InversionFailed { l })?;
        // forward check through the curve itself
        let back = self.sojourn(root)?;
        if (back - l).abs() > 1e-6 * l.abs().max(1.0) {
            return Err(Error::InversionFailed { l });
        }
        Ok(root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_load_gives_process_time() {
        let p = FlowLineParams::new(3.0, 1.7, 0.4, 5.0, 2.5).unwrap();
        assert_eq!(p.sojourn(0.0).unwrap(), 2.5);
        assert_eq!(p.throughput_for_sojourn(2.5).unwrap(), 0.0);
    }

    #[test]
    fn single_station_reduces_to_mm1() {
        let p = FlowLineParams::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        // M/M/1: 1/(μ − λ)
        assert!((p.sojourn(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((p.throughput_for_sojourn(2.0).unwrap() - 0.5).abs() < 1e-15);
        for lambda in [0.01, 0.3, 0.77, 0.99] {
            let mm1 = 1.0 / (1.0 - lambda);
            assert!((p.sojourn(lambda).unwrap() - mm1).abs() <= 1e-12 * mm1);
        }
    }

    #[test]
    fn two_term_example() {
        let p = FlowLineParams::new(1.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        let l = p.sojourn(0.5).unwrap();
        assert!((l - (2.0 + 1.0 / 6.0)).abs() < 1e-15);
        let back = p.throughput_for_sojourn(2.0 + 1.0 / 6.0).unwrap();
        assert!((back - 0.5).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        let p = FlowLineParams::new(1.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert!(matches!(p.sojourn(1.0), Err(Error::Unstable { .. })));
        assert!(matches!(p.sojourn(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(
            p.throughput_for_sojourn(0.5),
            Err(Error::InfeasibleSojourn { .. })
        ));
        let flat = FlowLineParams::new(1.0, 0.0, 0.0, 2.0, 1.0).unwrap();
        assert!(matches!(
            flat.throughput_for_sojourn(3.0),
            Err(Error::InversionFailed { .. })
        ));
        assert!(FlowLineParams::new(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sojourn_diverges_at_capacity() {
        let p = FlowLineParams::new(2.0, 1.0, 1.0, 3.0, 1.0).unwrap();
        assert!(p.sojourn(2.0 - 1e-9).unwrap() > 1e8);
    }

    fn params() -> impl Strategy<Value = (FlowLineParams, f64)> {
        (
            0.1f64..100.0,
            0.0f64..5.0,
            0.0f64..5.0,
            0.1f64..100.0,
            0.01f64..10.0,
            0.001f64..0.999,
        )
            .prop_filter("some variability", |(_, k1, k2, ..)| k1 + k2 > 1e-3)
            .prop_map(|(mu, k1, k2, k3, pt_f, u)| {
                let p = FlowLineParams::new(mu, k1, k2, k3, pt_f).unwrap();
                (p, u * p.capacity())
            })
    }

    proptest! {
        #[test]
        fn round_trip(case in params()) {
            let (p, lambda) = case;
            let l = p.sojourn(lambda).unwrap();
            let back = p.throughput_for_sojourn(l).unwrap();
            prop_assert!((back - lambda).abs() / lambda < 1e-9, "{p:?} {lambda} {back}");
        }

        #[test]
        fn at_most_one_root_is_stable(case in params()) {
            let (p, lambda) = case;
            let (r1, r2) = p.quadratic_roots(p.sojourn(lambda).unwrap());
            let inside = [r1, r2].iter().filter(|r| (0.0..p.capacity()).contains(*r)).count();
            prop_assert!(inside <= 1 || (r1 - r2).abs() <= 1e-9 * r1.abs());
        }

        #[test]
        fn strictly_increasing(case in params(), v in 0.0f64..1.0) {
            let (p, lambda) = case;
            let lo = lambda * v;
            if lo < lambda * (1.0 - 1e-9) {
                prop_assert!(p.sojourn(lo).unwrap() < p.sojourn(lambda).unwrap());
            }
        }
    }
}
