//! Demand and supply curves of the consulting market.
//!
//! Clients grow revenue at rate `psi` and enter at revenue `r_m` with a
//! constant birth rate `alpha`; a client buys an engagement when its benefit
//! `v * r` covers the price. Providers grow headcount at rate `mu` from a
//! Zipf initial condition `g0 / e` on `[n, 1/beta]`.
//!
//! Each side can be evaluated from closed forms or by quadrature of a
//! sampled density. The sampled path is independent of the closed-form
//! integrals and serves as their oracle.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::{log_axis, DensityGrid, Weight, DEFAULT_GRID_POINTS};
use crate::scalar::Real;

/// Which route evaluates a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveMode {
    /// Closed-form power-law and Zipf expressions.
    #[default]
    Closed,
    /// Trapezoidal quadrature over a density grid.
    Numeric,
}

/// Resolution of a sampled density: number of log-spaced points and the
/// ratio between the upper and lower edge of the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub points: usize,
    pub cap_ratio: T,
}

/// Relative trapezoid error targeted by [`GridSpec::for_demand`].
const DEMAND_QUADRATURE_ERROR: f64 = 1e-7;
/// Fraction of the demand tail allowed beyond the grid cap.
const DEMAND_TAIL_CUTOFF: f64 = 1e-10;
const MAX_GRID_POINTS: usize = 2_000_000;

impl<T: Real> GridSpec<T> {
    /// Demand grid fine enough for quadrature to track the closed form to
    /// about 1e-7 relative, capped where the neglected tail drops below
    /// 1e-10 of the population, and never narrower than `10^3 * r_m`.
    pub fn for_demand(params: &ModelParams<T>) -> Self {
        let a = (params.alpha / params.psi).as_f64();
        let max_span = (T::max_value().as_f64().ln() - params.r_m.as_f64().ln() - 1.0).max(1.0);
        let span = (DEMAND_TAIL_CUTOFF.ln() / (1.0 - a))
            .max(1e3f64.ln())
            .min(max_span);
        let h = (12.0 * DEMAND_QUADRATURE_ERROR / (a * (a + 1.0))).sqrt();
        let points = ((span / h).ceil() as usize + 1).clamp(DEFAULT_GRID_POINTS, MAX_GRID_POINTS);
        GridSpec {
            points,
            cap_ratio: T::lit(span.exp()),
        }
    }

    /// Supply grid covering the whole provider domain `[n, 1/beta]`.
    pub fn for_supply(params: &ModelParams<T>) -> Self {
        GridSpec {
            points: DEFAULT_GRID_POINTS,
            cap_ratio: T::one() / (params.beta * params.n),
        }
    }
}

/// Result of transporting a density along its characteristics.
#[derive(Debug, Clone)]
pub struct Evolved<T> {
    pub grid: DensityGrid<T>,
    /// Mass pushed past the upper edge of the axis.
    pub truncated_mass: T,
}

/// Transports a density under geometric growth `dx/dt = rate * x` for a
/// time `t`. Density is constant along characteristics `x0 * e^{rate t}`;
/// positions reached from the lower edge take the boundary value
/// `inflow(t - ln(x / lower) / rate)`, with `inflow` indexed by elapsed time.
pub fn evolve_density<T: Real>(
    grid: &DensityGrid<T>,
    rate: T,
    t: T,
    inflow: impl Fn(T) -> T,
) -> Result<Evolved<T>> {
    if !(rate > T::zero()) || !rate.is_finite() {
        return Err(Error::domain("growth rate", rate.as_f64(), "(0, inf)"));
    }
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::domain("evolution time", t.as_f64(), "[0, inf)"));
    }
    if t == T::zero() {
        return Ok(Evolved {
            grid: grid.clone(),
            truncated_mass: T::zero(),
        });
    }
    let lower = grid.lower_bound();
    let shrink = (-rate * t).exp();
    let snap = T::lit(1e-9);
    let values = grid
        .axis()
        .iter()
        .map(|&x| {
            let origin = x * shrink;
            if origin >= lower * (T::one() - snap) {
                sample_snapped(grid, origin.max(lower), snap)
            } else {
                inflow(t - (x / lower).ln() / rate)
            }
        })
        .collect();
    let evolved = DensityGrid::new(grid.axis().to_vec(), values)?;
    let leaving_from = (grid.upper_bound() * shrink).max(lower);
    let truncated_mass = grid.integrate_tail(leaving_from, Weight::None)?;
    Ok(Evolved {
        grid: evolved,
        truncated_mass,
    })
}

/// Linear interpolation that returns node values exactly when `x` sits on
/// a node up to relative position `snap` within its segment.
fn sample_snapped<T: Real>(grid: &DensityGrid<T>, x: T, snap: T) -> T {
    let axis = grid.axis();
    let i = axis.partition_point(|&a| a <= x).saturating_sub(1).min(axis.len() - 2);
    let s = (x - axis[i]) / (axis[i + 1] - axis[i]);
    let v = grid.values();
    if s <= snap {
        v[i]
    } else if s >= T::one() - snap {
        v[i + 1]
    } else {
        v[i] + (v[i + 1] - v[i]) * s
    }
}

#[derive(Debug, Clone)]
struct TimedGrid<T> {
    grid: DensityGrid<T>,
    time: T,
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("time", t.as_f64(), "[0, inf)"))
    }
}

/// Client side of the market.
#[derive(Debug, Clone)]
pub struct DemandSide<T> {
    params: ModelParams<T>,
    grid: Option<TimedGrid<T>>,
}

impl<T: Real> DemandSide<T> {
    /// Closed-form demand.
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(DemandSide { params, grid: None })
    }

    /// Closed-form demand plus a density grid sampled at `t = 0` on
    /// `[r_m, cap_ratio * r_m]`, enabling [`CurveMode::Numeric`].
    pub fn with_grid(params: ModelParams<T>, spec: GridSpec<T>) -> Result<Self> {
        let mut side = Self::new(params)?;
        if spec.cap_ratio < T::lit(1e3) {
            return Err(Error::InvalidGrid(format!(
                "demand grid must reach at least 1e3 * r_m, got {} * r_m",
                spec.cap_ratio
            )));
        }
        let r_m = side.params.r_m;
        let grid = DensityGrid::log_spaced(r_m, r_m * spec.cap_ratio, spec.points, |r| {
            side.density_unchecked(T::zero(), r)
        })?;
        side.grid = Some(TimedGrid {
            grid,
            time: T::zero(),
        });
        Ok(side)
    }

    /// Same as [`with_grid`](Self::with_grid) at the default resolution.
    pub fn gridded(params: ModelParams<T>) -> Result<Self> {
        Self::with_grid(params, GridSpec::for_demand(&params))
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn grid(&self) -> Option<(&DensityGrid<T>, T)> {
        self.grid.as_ref().map(|g| (&g.grid, g.time))
    }

    /// Density of boundary entrants at revenue `r_m`.
    pub fn boundary_density(&self, t: T) -> T {
        self.params.alpha * self.params.f0 * (self.params.alpha * t).exp()
    }

    fn density_unchecked(&self, t: T, r: T) -> T {
        let p = &self.params;
        self.boundary_density(t) * (r / p.r_m).powf(-p.alpha / p.psi)
    }

    /// Number of clients per unit of revenue at revenue `r`.
    pub fn demand_density(&self, t: T, r: T) -> Result<T> {
        check_time(t)?;
        if !(r >= self.params.r_m) || !r.is_finite() {
            return Err(Error::domain(
                "client revenue",
                r.as_f64(),
                format!("[{}, inf)", self.params.r_m),
            ));
        }
        Ok(self.density_unchecked(t, r))
    }

    /// Revenue of the marginal client at price `p`. Below `v * r_m` every
    /// client demands, so the threshold sticks to the entrant revenue.
    fn threshold_revenue(&self, p: T) -> Result<T> {
        if !p.is_finite() || p < T::zero() {
            return Err(Error::domain("price", p.as_f64(), "[0, inf)"));
        }
        Ok((p / self.params.v).max(self.params.r_m))
    }

    /// Number of clients whose benefit covers price `p`.
    pub fn demand_at(&self, t: T, p: T, mode: CurveMode) -> Result<T> {
        check_time(t)?;
        let r = self.threshold_revenue(p)?;
        match mode {
            CurveMode::Closed => {
                let pr = &self.params;
                let ratio = pr.alpha / pr.psi;
                Ok(pr.f0
                    * pr.alpha
                    * (pr.alpha * t).exp()
                    * (pr.psi / (pr.alpha - pr.psi))
                    * pr.r_m
                    * (r / pr.r_m).powf(T::one() - ratio))
            }
            CurveMode::Numeric => {
                let grid = self.grid_at(t)?;
                if r >= grid.upper_bound() {
                    return Ok(T::zero());
                }
                grid.integrate_tail(r, Weight::None)
            }
        }
    }

    /// Clients crossing the demand threshold per year at price `p`:
    /// `psi * r * f(t, r)` at the threshold revenue.
    pub fn demand_flux(&self, t: T, p: T, mode: CurveMode) -> Result<T> {
        check_time(t)?;
        let r = self.threshold_revenue(p)?;
        let f = match mode {
            CurveMode::Closed => self.density_unchecked(t, r),
            CurveMode::Numeric => {
                let grid = self.grid_at(t)?;
                if r >= grid.upper_bound() {
                    T::zero()
                } else {
                    grid.interpolate(r)?
                }
            }
        };
        Ok(self.params.psi * r * f)
    }

    /// Highest price with closed-form demand: below `v * r_m` demand is the
    /// whole client population.
    pub fn saturation_price(&self) -> T {
        self.params.v * self.params.r_m
    }

    fn grid_at(&self, t: T) -> Result<std::borrow::Cow<'_, DensityGrid<T>>> {
        let tg = self.grid.as_ref().ok_or(Error::MissingGrid { side: "demand" })?;
        if tg.time == t {
            Ok(std::borrow::Cow::Borrowed(&tg.grid))
        } else {
            Ok(std::borrow::Cow::Owned(self.evolve(tg, t)?.grid))
        }
    }

    fn evolve(&self, tg: &TimedGrid<T>, t: T) -> Result<Evolved<T>> {
        if t < tg.time {
            return Err(Error::domain(
                "time",
                t.as_f64(),
                format!("[{}, inf) (grids only move forward)", tg.time),
            ));
        }
        let start = tg.time;
        evolve_density(&tg.grid, self.params.psi, t - start, |s| self.boundary_density(start + s))
    }

    /// Moves the density grid forward to time `t` along characteristics.
    /// Returns the advanced side and the mass that left the grid cap.
    pub fn advanced_to(&self, t: T) -> Result<(Self, T)> {
        check_time(t)?;
        match &self.grid {
            None => Ok((self.clone(), T::zero())),
            Some(tg) => {
                let evolved = self.evolve(tg, t)?;
                Ok((
                    DemandSide {
                        params: self.params,
                        grid: Some(TimedGrid {
                            grid: evolved.grid,
                            time: t,
                        }),
                    },
                    evolved.truncated_mass,
                ))
            }
        }
    }
}

/// Provider side of the market.
#[derive(Debug, Clone)]
pub struct SupplySide<T> {
    params: ModelParams<T>,
    grid: Option<TimedGrid<T>>,
}

impl<T: Real> SupplySide<T> {
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(SupplySide { params, grid: None })
    }

    /// Closed-form supply plus a sampled Zipf density at `t = 0`.
    pub fn with_grid(params: ModelParams<T>, points: usize) -> Result<Self> {
        let mut side = Self::new(params)?;
        let b = params.bounds();
        let g0 = params.g0;
        if !(b.e_max_domain > b.e_min_domain) {
            return Err(Error::InvalidGrid(
                "provider domain [n, 1/beta] is empty (beta * n = 1)".into(),
            ));
        }
        let axis = log_axis(b.e_min_domain, b.e_max_domain, points);
        let values = axis.iter().map(|&e| g0 / e).collect();
        let grid = DensityGrid::new(axis, values)?;
        side.grid = Some(TimedGrid {
            grid,
            time: T::zero(),
        });
        Ok(side)
    }

    pub fn gridded(params: ModelParams<T>) -> Result<Self> {
        Self::with_grid(params, GridSpec::for_supply(&params).points)
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn grid(&self) -> Option<(&DensityGrid<T>, T)> {
        self.grid.as_ref().map(|g| (&g.grid, g.time))
    }

    fn growth(&self, t: T) -> T {
        (self.params.mu * t).exp()
    }

    fn density_unchecked(&self, t: T, e: T) -> T {
        self.params.g0 * self.growth(t) / e
    }

    /// Number of providers per employee of size at size `e`.
    pub fn supply_density(&self, t: T, e: T) -> Result<T> {
        check_time(t)?;
        let b = self.params.bounds();
        if !(e >= b.e_min_domain && e <= b.e_max_domain) {
            return Err(Error::domain(
                "provider size",
                e.as_f64(),
                format!("[{}, {}]", b.e_min_domain, b.e_max_domain),
            ));
        }
        Ok(self.density_unchecked(t, e))
    }

    fn check_price(&self, p: T) -> Result<()> {
        let (floor, top) = (self.params.cost_floor(), self.params.local_cost());
        if !(p > floor) {
            return Err(Error::BelowCostFloor {
                price: p.as_f64(),
                floor: floor.as_f64(),
            });
        }
        if !(p <= top) {
            return Err(Error::domain(
                "price",
                p.as_f64(),
                format!("({}, {}]", floor.as_f64(), top.as_f64()),
            ));
        }
        Ok(())
    }

    /// Engagements providers can deliver profitably at price `p`.
    pub fn supply_at(&self, t: T, p: T, mode: CurveMode) -> Result<T> {
        check_time(t)?;
        self.check_price(p)?;
        let pr = &self.params;
        match mode {
            CurveMode::Closed => Ok(self.growth(t) * pr.g0 / (pr.n * pr.beta)
                * (T::one() + (p - pr.local_cost()) / (pr.n * pr.delta_c))),
            CurveMode::Numeric => {
                let e_min = pr.min_viable_size(p)?;
                let grid = self.grid_at(t)?;
                if e_min >= grid.upper_bound() {
                    return Ok(T::zero());
                }
                Ok(grid.integrate_tail(e_min, Weight::Identity)? / pr.n)
            }
        }
    }

    /// Supply at price `p`, extended by zero at and below the cost floor.
    pub fn supply_or_zero(&self, t: T, p: T, mode: CurveMode) -> Result<T> {
        if p <= self.params.cost_floor() {
            Ok(T::zero())
        } else {
            self.supply_at(t, p, mode)
        }
    }

    /// Density of providers at the marginal size for price `p`.
    pub fn marginal_density(&self, t: T, p: T, mode: CurveMode) -> Result<T> {
        let e_min = self.params.min_viable_size(p)?;
        match mode {
            CurveMode::Closed => self.supply_density(t, e_min),
            CurveMode::Numeric => self.grid_at(t)?.interpolate(e_min),
        }
    }

    /// Sensitivity of supply to price, `e_min * g(t, e_min) / (n^2 beta delta_c)`.
    pub fn supply_price_derivative(&self, t: T, p: T, mode: CurveMode) -> Result<T> {
        let pr = &self.params;
        let e_min = pr.min_viable_size(p)?;
        let g = self.marginal_density(t, p, mode)?;
        Ok(e_min * g / (pr.n * pr.n * pr.beta * pr.delta_c))
    }

    fn grid_at(&self, t: T) -> Result<std::borrow::Cow<'_, DensityGrid<T>>> {
        let tg = self.grid.as_ref().ok_or(Error::MissingGrid { side: "supply" })?;
        if tg.time == t {
            Ok(std::borrow::Cow::Borrowed(&tg.grid))
        } else {
            Ok(std::borrow::Cow::Owned(self.evolve(tg, t)?.grid))
        }
    }

    fn evolve(&self, tg: &TimedGrid<T>, t: T) -> Result<Evolved<T>> {
        if t < tg.time {
            return Err(Error::domain(
                "time",
                t.as_f64(),
                format!("[{}, inf) (grids only move forward)", tg.time),
            ));
        }
        if self.params.mu == T::zero() {
            return Ok(Evolved {
                grid: tg.grid.clone(),
                truncated_mass: T::zero(),
            });
        }
        let start = tg.time;
        let n = self.params.n;
        evolve_density(&tg.grid, self.params.mu, t - start, |s| {
            self.density_unchecked(start + s, n)
        })
    }

    pub fn advanced_to(&self, t: T) -> Result<(Self, T)> {
        check_time(t)?;
        match &self.grid {
            None => Ok((self.clone(), T::zero())),
            Some(tg) => {
                let evolved = self.evolve(tg, t)?;
                Ok((
                    SupplySide {
                        params: self.params,
                        grid: Some(TimedGrid {
                            grid: evolved.grid,
                            time: t,
                        }),
                    },
                    evolved.truncated_mass,
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const F0: f64 = 0.092_806_209_768_638_78;

    fn german() -> ModelParams<f64> {
        ModelParams {
            f0: F0,
            g0: 3.125,
            ..ModelParams::german_baseline()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn demand_density_values() {
        let d = DemandSide::new(german()).unwrap();
        let at_entry = d.demand_density(0.0, 1.3e6).unwrap();
        assert!(rel(at_entry, 0.073 * F0) < 1e-12);
        assert!((at_entry - 6.778e-3).abs() < 5e-6);

        // oracle: (1.48e6 / 1.3e6)^(-alpha/psi) * alpha * F0 by logs
        let oracle = (-(0.073 / 0.036) * (1.48f64 / 1.3).ln()).exp() * 0.073 * F0;
        let got = d.demand_density(0.0, 1.48e6).unwrap();
        assert!(rel(got, oracle) < 1e-12);
        assert!((got - 5.21e-3).abs() < 5e-6);

        for &r in &[1.3e6, 2e6, 9e7] {
            let ratio = d.demand_density(3.0, r).unwrap() / d.demand_density(0.0, r).unwrap();
            assert!(rel(ratio, (0.073f64 * 3.0).exp()) < 1e-12);
        }
        assert!(d.demand_density(0.0, 1e6).is_err());
        assert!(d.demand_density(-1.0, 2e6).is_err());
    }

    #[test]
    fn demand_anchor_and_population() {
        let d = DemandSide::new(german()).unwrap();
        assert!(rel(d.demand_at(0.0, 37_000.0, CurveMode::Closed).unwrap(), 7500.0) < 1e-12);
        let pop = d.demand_at(0.0, 0.025 * 1.3e6, CurveMode::Closed).unwrap();
        // analytic tail: alpha F0 r_m psi / (alpha - psi)
        let oracle = 0.073 * F0 * 1.3e6 * 0.036 / 0.037;
        assert!(rel(pop, oracle) < 1e-12);
        assert!((pop - 8569.27).abs() < 0.01);
        // every client demands below the saturation price
        assert_eq!(d.demand_at(0.0, 10_000.0, CurveMode::Closed).unwrap(), pop);
        assert!(d.demand_at(0.0, f64::NAN, CurveMode::Closed).is_err());
        assert!(d.demand_at(0.0, -1.0, CurveMode::Closed).is_err());
        assert!(matches!(
            d.demand_at(0.0, 37_000.0, CurveMode::Numeric),
            Err(Error::MissingGrid { .. })
        ));
    }

    #[test]
    fn demand_closed_vs_numeric() {
        let d = DemandSide::gridded(german()).unwrap();
        for i in 0..=40 {
            let p = 32_500.0 * (1.0 + 2.0 * i as f64 / 40.0);
            let c = d.demand_at(0.0, p, CurveMode::Closed).unwrap();
            let n = d.demand_at(0.0, p, CurveMode::Numeric).unwrap();
            assert!(rel(n, c) < 1e-6, "p = {p}: {n} vs {c}");
        }
    }

    #[test]
    fn supply_density_values() {
        let s = SupplySide::new(german()).unwrap();
        assert_eq!(s.supply_density(0.0, 1.0).unwrap(), 3.125);
        assert!(rel(s.supply_density(0.0, 2600.0).unwrap(), 3.125 / 2600.0) < 1e-15);
        assert!((s.supply_density(0.0, 2600.0).unwrap() - 1.202e-3).abs() < 1e-6);
        let ratio = s.supply_density(2.0, 70.0).unwrap() / s.supply_density(0.0, 70.0).unwrap();
        assert!(rel(ratio, (0.07f64 * 2.0).exp()) < 1e-12);
        assert!(s.supply_density(0.0, 0.5).is_err());
        assert!(s.supply_density(0.0, 5001.0).is_err());
    }

    #[test]
    fn supply_values() {
        let s = SupplySide::gridded(german()).unwrap();
        let closed = s.supply_at(0.0, 37_000.0, CurveMode::Closed).unwrap();
        assert!(rel(closed, 15_625.0 * 0.48) < 1e-12);
        let numeric = s.supply_at(0.0, 37_000.0, CurveMode::Numeric).unwrap();
        assert!(rel(numeric, 7500.0) < 1e-9);
        assert!(matches!(
            s.supply_at(0.0, 25_000.0, CurveMode::Closed),
            Err(Error::BelowCostFloor { .. })
        ));
        assert_eq!(s.supply_or_zero(0.0, 25_000.0, CurveMode::Closed).unwrap(), 0.0);
        assert!(s.supply_at(0.0, 25_000.0 + 1e-9, CurveMode::Closed).unwrap() < 1e-6);
        let grown = s.supply_at(4.0, 41_000.0, CurveMode::Closed).unwrap();
        let base = s.supply_at(0.0, 41_000.0, CurveMode::Closed).unwrap();
        assert!(rel(grown, base * (0.28f64).exp()) < 1e-12);
        // the evolved grid is interpolated off its nodes: error of order h^2 / 8
        let grown_numeric = s.supply_at(4.0, 41_000.0, CurveMode::Numeric).unwrap();
        assert!(rel(grown_numeric, grown) < 1e-4);
    }

    #[test]
    fn supply_derivative_matches_finite_difference() {
        let s = SupplySide::new(german()).unwrap();
        let h = 1e-3;
        let fd = (s.supply_at(1.0, 37_000.0 + h, CurveMode::Closed).unwrap()
            - s.supply_at(1.0, 37_000.0 - h, CurveMode::Closed).unwrap())
            / (2.0 * h);
        let d = s.supply_price_derivative(1.0, 37_000.0, CurveMode::Closed).unwrap();
        assert!(rel(d, fd) < 1e-6);
    }

    #[test]
    fn flux_identity_closed_form() {
        let d = DemandSide::new(german()).unwrap();
        for &p in &[33_000.0, 37_000.0, 45_000.0, 80_000.0] {
            for &t in &[0.0, 2.5, 10.0] {
                let flux = d.demand_flux(t, p, CurveMode::Closed).unwrap();
                let dem = d.demand_at(t, p, CurveMode::Closed).unwrap();
                assert!(rel(flux / dem, 0.037) < 1e-12);
            }
        }
    }

    #[test]
    fn evolve_identity_at_zero() {
        let g = DensityGrid::log_spaced(1.0, 100.0, 64, |x| 1.0 / x).unwrap();
        let e = evolve_density(&g, 0.5, 0.0, |_| 7.0).unwrap();
        assert_eq!(e.grid, g);
        assert_eq!(e.truncated_mass, 0.0);
        assert!(evolve_density(&g, 0.0, 1.0, |_| 7.0).is_err());
        assert!(evolve_density(&g, 0.5, -1.0, |_| 7.0).is_err());
    }

    #[test]
    fn evolve_point_mass_moves_along_characteristic() {
        // 101 nodes, one node per 0.01 in log space
        let axis = log_axis(1.0f64, 1f64.exp(), 101);
        let mut values = vec![0.0; 101];
        values[20] = 4.0;
        let g = DensityGrid::new(axis, values).unwrap();
        let rate = 0.1;
        let t = 0.3; // shift of 0.03 in log space = 3 nodes
        let e = evolve_density(&g, rate, t, |_| 0.0).unwrap();
        let v = e.grid.values();
        assert_eq!(v[23], 4.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn evolve_reports_truncated_mass() {
        let g = DensityGrid::linear(1.0, 2.0, 101, |_| 1.0).unwrap();
        let t = 2f64.ln() * 0.5;
        let e = evolve_density(&g, 1.0, t, |_| 1.0).unwrap();
        // mass that started on [2 e^{-rate t}, 2]
        let from = 2.0 * (-t).exp();
        assert!((e.truncated_mass - (2.0 - from)).abs() < 1e-12);
    }

    #[test]
    fn demand_grid_advances_to_closed_form() {
        let p = german();
        let d = DemandSide::with_grid(
            p,
            GridSpec {
                points: 2001,
                cap_ratio: 1e4,
            },
        )
        .unwrap();
        let (later, lost) = d.advanced_to(2.0).unwrap();
        assert!(lost > 0.0);
        let (grid, time) = later.grid().unwrap();
        assert_eq!(time, 2.0);
        for (&r, &f) in grid.axis().iter().zip(grid.values()).step_by(37) {
            let closed = d.demand_density(2.0, r).unwrap();
            assert!(rel(f, closed) < 1e-3, "r = {r}");
        }
    }

    #[test]
    fn supply_grid_with_zero_growth_is_static() {
        let p = ModelParams { mu: 0.0, ..german() };
        let s = SupplySide::gridded(p).unwrap();
        let (later, lost) = s.advanced_to(3.0).unwrap();
        assert_eq!(lost, 0.0);
        assert_eq!(later.grid().unwrap().0, s.grid().unwrap().0);
    }

    #[test]
    fn single_precision_curves() {
        let p: ModelParams<f32> = german().cast();
        let d = DemandSide::new(p).unwrap();
        let s = SupplySide::new(p).unwrap();
        let dem = d.demand_at(0.0, 37_000.0, CurveMode::Closed).unwrap();
        let sup = s.supply_at(0.0, 37_000.0, CurveMode::Closed).unwrap();
        assert!((dem - 7500.0).abs() / 7500.0 < 1e-4);
        assert!((sup - 7500.0).abs() / 7500.0 < 1e-4);
    }
}
