//! Market constants and the pointwise cost algebra of a provider firm.
//!
//! A provider with `e` employees can run a fraction `min(beta * e, 1)` of its
//! work from a cheaper remote location. An engagement needs `n` workers, each
//! costing `c` locally and saving `delta_c` when displaced.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// All constants of the market model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Client benefit as a fraction of client revenue.
    pub v: T,
    /// Workers per client engagement.
    pub n: T,
    /// Local unit labor cost per worker and year.
    pub c: T,
    /// Savings per fully displaced worker and year.
    pub delta_c: T,
    /// Displaceable activity fraction per employee of provider size.
    pub beta: T,
    /// Client revenue growth rate.
    pub psi: T,
    /// Provider workforce growth rate.
    pub mu: T,
    /// Client birth rate.
    pub alpha: T,
    /// Revenue of an entrant client.
    pub r_m: T,
    /// Demand density normalization.
    pub f0: T,
    /// Zipf supply normalization.
    pub g0: T,
}

/// Names accepted by [`ModelParams::get`] and [`ModelParams::set`].
pub const PARAM_NAMES: [&str; 11] = [
    "v", "n", "c", "delta_c", "beta", "psi", "mu", "alpha", "r_m", "F0", "g0",
];

/// Admissible provider sizes: from the engagement headcount up to the size
/// at which all activity is displaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProviderBounds<T> {
    pub e_min_domain: T,
    pub e_max_domain: T,
}

impl ModelParams<f64> {
    /// Constants of the German transportation case, before the demand and
    /// supply normalizations are pinned by anchors (both set to 1).
    pub fn german_baseline() -> Self {
        ModelParams {
            v: 0.025,
            n: 1.0,
            c: 50_000.0,
            delta_c: 25_000.0,
            beta: 0.0002,
            psi: 0.036,
            mu: 0.07,
            alpha: 0.073,
            r_m: 1.3e6,
            f0: 1.0,
            g0: 1.0,
        }
    }
}

impl<T: Real> ModelParams<T> {
    /// Converts every field to another scalar type.
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let cv = |x: T| U::lit(x.as_f64());
        ModelParams {
            v: cv(self.v),
            n: cv(self.n),
            c: cv(self.c),
            delta_c: cv(self.delta_c),
            beta: cv(self.beta),
            psi: cv(self.psi),
            mu: cv(self.mu),
            alpha: cv(self.alpha),
            r_m: cv(self.r_m),
            f0: cv(self.f0),
            g0: cv(self.g0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("v", self.v),
            ("n", self.n),
            ("c", self.c),
            ("delta_c", self.delta_c),
            ("beta", self.beta),
            ("psi", self.psi),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("r_m", self.r_m),
            ("F0", self.f0),
            ("g0", self.g0),
        ];
        if let Some((name, _)) = all.iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        let zero = T::zero();
        let checks = [
            (self.v > zero, "v > 0"),
            (self.n >= T::one(), "n >= 1"),
            (self.c > zero, "c > 0"),
            (self.delta_c > zero && self.delta_c <= self.c, "0 < delta_c <= c"),
            (self.beta > zero, "beta > 0"),
            (self.beta * self.n <= T::one(), "beta * n <= 1"),
            (self.r_m > zero, "r_m > 0"),
            (self.f0 > zero, "F0 > 0"),
            (self.g0 > zero, "g0 > 0"),
            (self.psi > zero, "psi > 0"),
            (self.mu >= zero, "mu >= 0"),
            (self.alpha > self.psi, "alpha > psi"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, rule)) => Err(Error::InvalidParams(format!("{rule} violated"))),
            None => Ok(()),
        }
    }

    pub fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    pub fn get(&self, name: &str) -> Option<T> {
        Some(match name {
            "v" => self.v,
            "n" => self.n,
            "c" => self.c,
            "delta_c" => self.delta_c,
            "beta" => self.beta,
            "psi" => self.psi,
            "mu" => self.mu,
            "alpha" => self.alpha,
            "r_m" => self.r_m,
            "F0" | "f0" => self.f0,
            "g0" => self.g0,
            _ => return None,
        })
    }

    /// Sets a field by name. Does not validate.
    pub fn set(&mut self, name: &str, value: T) -> Result<()> {
        let slot = match name {
            "v" => &mut self.v,
            "n" => &mut self.n,
            "c" => &mut self.c,
            "delta_c" => &mut self.delta_c,
            "beta" => &mut self.beta,
            "psi" => &mut self.psi,
            "mu" => &mut self.mu,
            "alpha" => &mut self.alpha,
            "r_m" => &mut self.r_m,
            "F0" | "f0" => &mut self.f0,
            "g0" => &mut self.g0,
            _ => return Err(Error::InvalidParams(format!("unknown parameter `{name}`"))),
        };
        *slot = value;
        Ok(())
    }

    pub fn bounds(&self) -> ProviderBounds<T> {
        ProviderBounds {
            e_min_domain: self.n,
            e_max_domain: T::one() / self.beta,
        }
    }

    /// Engagement cost under full displacement, `n * (c - delta_c)`.
    pub fn cost_floor(&self) -> T {
        self.n * (self.c - self.delta_c)
    }

    /// Engagement cost with purely local labor, `n * c`.
    pub fn local_cost(&self) -> T {
        self.n * self.c
    }

    /// Fraction of a provider's labor that can run remotely: `min(beta * e, 1)`.
    pub fn offshore_fraction(&self, e: T) -> Result<T> {
        if !(e >= T::zero()) {
            return Err(Error::domain("provider size", e.as_f64(), "[0, inf)"));
        }
        Ok((self.beta * e).min(T::one()))
    }

    pub fn engagement_cost(&self, e: T) -> Result<T> {
        let phi = self.offshore_fraction(e)?;
        Ok(self.n * (self.c - phi * self.delta_c))
    }

    /// Smallest provider able to deliver an engagement at price `p`,
    /// clamped below at the engagement headcount `n`.
    pub fn min_viable_size(&self, p: T) -> Result<T> {
        let floor = self.cost_floor();
        if !(p > floor) {
            return Err(Error::BelowCostFloor {
                price: p.as_f64(),
                floor: floor.as_f64(),
            });
        }
        let e = (self.local_cost() - p) / (self.n * self.beta * self.delta_c);
        Ok(e.max(self.n))
    }

    /// Offshore share the marginal provider needs to break even at price `p`.
    pub fn required_offshore_share(&self, p: T) -> Result<T> {
        let (floor, top) = (self.cost_floor(), self.local_cost());
        if !(p >= floor && p <= top) {
            return Err(Error::domain(
                "price",
                p.as_f64(),
                format!("[{}, {}]", floor.as_f64(), top.as_f64()),
            ));
        }
        Ok((top - p) / (self.n * self.delta_c))
    }

    /// Provider size above which displacement savings outpace a price
    /// moving at `price_slope` per year. Zero when prices are not falling.
    pub fn profitability_threshold_size(&self, price_slope: T) -> Result<T> {
        if !price_slope.is_finite() {
            return Err(Error::domain("price slope", price_slope.as_f64(), "finite"));
        }
        if price_slope >= T::zero() {
            return Ok(T::zero());
        }
        if self.mu <= T::zero() {
            return Err(Error::NoProviderOutruns {
                slope: price_slope.as_f64(),
            });
        }
        Ok(price_slope.abs() / (self.beta * self.mu * self.n * self.delta_c))
    }
}
