//! Market clearing, regime classification and the flows that follow.
//!
//! A market is *emerging* when clients cross the demand threshold faster
//! than providers grow (`psi * r * f(t, r) >= mu * D(t, p)` at `r = p / v`);
//! the price then sits at the smallest provider's cost and new providers
//! enter. Otherwise it is *mature*: the price falls and marginal providers
//! exit.

use std::cell::RefCell;
use std::fmt;

use crate::curves::{CurveMode, DemandSide, SupplySide};
use crate::error::{Error, Result};
use crate::numerics::{bisect, Bracket, DEFAULT_PRICE_TOL};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Emerging,
    Mature,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Emerging => "emerging",
            Regime::Mature => "mature",
        })
    }
}

/// Regime plus how far the market is from the boundary: demand-side
/// crossing flux over provider growth, minus one. Positive means emerging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLabel<T> {
    pub tag: Regime,
    pub margin: T,
}

/// Coefficient that converts the client/provider flow imbalance into a
/// price slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlopeMode {
    /// Marginal provider count density `g(t, e_min) / (n beta delta_c)`.
    Literal,
    /// Marginal serviced capacity `dS/dp = e_min g(t, e_min) / (n^2 beta delta_c)`.
    #[default]
    CapacityBalance,
}

impl fmt::Display for SlopeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlopeMode::Literal => "literal",
            SlopeMode::CapacityBalance => "capacity",
        })
    }
}

impl std::str::FromStr for SlopeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "literal" | "prop2-literal" => Ok(SlopeMode::Literal),
            "capacity" | "capacity-balance" => Ok(SlopeMode::CapacityBalance),
            other => Err(Error::InvalidParams(format!(
                "unknown slope mode `{other}` (expected capacity or literal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T> {
    pub curve_mode: CurveMode,
    pub slope_mode: SlopeMode,
    pub tol: T,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            curve_mode: CurveMode::Closed,
            slope_mode: SlopeMode::CapacityBalance,
            tol: T::lit(DEFAULT_PRICE_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult<T> {
    pub t: T,
    pub price: T,
    pub regime: RegimeLabel<T>,
    /// Clients served at the cleared price.
    pub served: T,
    /// Size of the just-profitable provider.
    pub marginal_size: T,
    /// Offshore share the marginal provider needs.
    pub required_share: T,
    /// New smallest-size providers per year; emerging markets only.
    pub entry_rate: Option<T>,
    /// Providers crossing the viability threshold per year; mature markets only.
    pub exit_rate: Option<T>,
    pub price_slope: T,
    /// Final bisection bracket of the clearing residual `D - S`.
    pub bracket: Bracket<T>,
}

/// A cleared pair of curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cleared<T> {
    pub price: T,
    pub served: T,
    pub bracket: Bracket<T>,
}

/// Finds the price where a decreasing `demand` meets a non-decreasing
/// `supply` above `floor`.
///
/// The upper end of the bracket starts at `start` and doubles until the
/// residual `demand - supply` turns non-positive or `cap` is reached.
pub fn clear<T: Real>(
    mut demand: impl FnMut(T) -> Result<T>,
    mut supply: impl FnMut(T) -> Result<T>,
    floor: T,
    start: T,
    cap: T,
    tol: T,
) -> Result<Cleared<T>> {
    let cannot_clear =
        |lo: T, hi: T, d: &mut dyn FnMut(T) -> Result<T>, s: &mut dyn FnMut(T) -> Result<T>| {
            Ok::<_, Error>(Error::MarketCannotClear {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
                demand_lo: d(lo)?.as_f64(),
                supply_lo: s(lo)?.as_f64(),
                demand_hi: d(hi)?.as_f64(),
                supply_hi: s(hi)?.as_f64(),
            })
        };

    let mut lo = floor;
    let f_lo0 = demand(lo)? - supply(lo)?;
    if f_lo0 < T::zero() {
        return Err(cannot_clear(lo, cap, &mut demand, &mut supply)?);
    }
    let mut f_lo = f_lo0;
    let two = T::lit(2.0);
    let mut hi = if start > T::zero() { start } else { cap };
    while hi <= lo {
        hi = hi * two;
    }
    let f_hi = loop {
        hi = hi.min(cap);
        let r = demand(hi)? - supply(hi)?;
        if r <= T::zero() {
            break r;
        }
        if hi >= cap {
            return Err(cannot_clear(floor, cap, &mut demand, &mut supply)?);
        }
        lo = hi;
        f_lo = r;
        hi = hi * two;
    };

    let bracket = Bracket::new(lo, hi, f_lo, f_hi)?;
    let failure = RefCell::new(None);
    let residual = |p: T| match demand(p).and_then(|d| supply(p).map(|s| d - s)) {
        Ok(r) => r,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            T::nan()
        }
    };
    let result = bisect(residual, bracket, tol);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let fin = result?;
    let price = fin.midpoint();
    Ok(Cleared {
        price,
        served: demand(price)?,
        bracket: fin,
    })
}

/// Clears the market at time `t` and derives regime, marginal provider,
/// flows and price slope.
pub fn solve_equilibrium<T: Real>(
    demand: &DemandSide<T>,
    supply: &SupplySide<T>,
    t: T,
    opts: &SolveOptions<T>,
) -> Result<EquilibriumResult<T>> {
    let mode = opts.curve_mode;
    let (demand, supply) = match mode {
        CurveMode::Closed => (demand.clone(), supply.clone()),
        CurveMode::Numeric => (demand.advanced_to(t)?.0, supply.advanced_to(t)?.0),
    };
    let params = *supply.params();
    let cleared = clear(
        |p| demand.demand_at(t, p, mode),
        |p| supply.supply_or_zero(t, p, mode),
        params.cost_floor(),
        demand.saturation_price(),
        params.local_cost(),
        opts.tol,
    )?;
    let price = cleared.price;
    let regime = classify_regime(&demand, &supply, t, price, mode)?;
    let (entry, exit, slope) = match regime.tag {
        Regime::Emerging => (Some(entry_rate(&demand, &supply, t, mode)?), None, T::zero()),
        Regime::Mature => {
            let slope = price_slope(&demand, &supply, t, price, opts.slope_mode, mode)?;
            let exit = exit_rate(&supply, t, price, slope.min(T::zero()), mode)?;
            (None, Some(exit), slope)
        }
    };
    Ok(EquilibriumResult {
        t,
        price,
        regime,
        served: cleared.served,
        marginal_size: params.min_viable_size(price)?,
        required_share: params.required_offshore_share(price)?,
        entry_rate: entry,
        exit_rate: exit,
        price_slope: slope,
        bracket: cleared.bracket,
    })
}

/// Classifies the market by comparing the client crossing flux with the
/// provider growth of demand at `p_test`. Ties count as emerging.
pub fn classify_regime<T: Real>(
    demand: &DemandSide<T>,
    supply: &SupplySide<T>,
    t: T,
    p_test: T,
    mode: CurveMode,
) -> Result<RegimeLabel<T>> {
    supply.supply_at(t, p_test, mode)?;
    let mu = supply.params().mu;
    let flux = demand.demand_flux(t, p_test, mode)?;
    let growth = mu * demand.demand_at(t, p_test, mode)?;
    // relative slack so that mu = alpha - psi classifies as a tie despite rounding
    let slack = T::one() - T::epsilon() * T::lit(64.0);
    let tag = if flux >= growth * slack {
        Regime::Emerging
    } else {
        Regime::Mature
    };
    let margin = if growth > T::zero() {
        flux / growth - T::one()
    } else {
        T::infinity()
    };
    Ok(RegimeLabel { tag, margin })
}

/// Price at which an emerging market settles: the engagement cost of the
/// smallest provider, `n * (c - phi(n) * delta_c)`.
pub fn emerging_price<T: Real>(supply: &SupplySide<T>) -> Result<T> {
    let p = supply.params();
    p.engagement_cost(p.n)
}

/// Smallest-size providers entering per year in an emerging market.
pub fn entry_rate<T: Real>(
    demand: &DemandSide<T>,
    supply: &SupplySide<T>,
    t: T,
    mode: CurveMode,
) -> Result<T> {
    let price = emerging_price(supply)?;
    let label = classify_regime(demand, supply, t, price, mode)?;
    if label.tag != Regime::Emerging {
        return Err(Error::WrongRegime {
            expected: "emerging",
        });
    }
    let mu = supply.params().mu;
    let flow = demand.demand_flux(t, price, mode)? - mu * demand.demand_at(t, price, mode)?;
    Ok(flow.max(T::zero()))
}

/// Providers per year that fall below the viability threshold while the
/// price declines at `price_slope`.
pub fn exit_rate<T: Real>(
    supply: &SupplySide<T>,
    t: T,
    price: T,
    price_slope: T,
    mode: CurveMode,
) -> Result<T> {
    if price_slope > T::zero() {
        return Err(Error::PositiveSlope {
            slope: price_slope.as_f64(),
        });
    }
    let p = supply.params();
    let g = supply.marginal_density(t, price, mode)?;
    Ok(g * price_slope.abs() / (p.n * p.beta * p.delta_c))
}

/// Price slope balancing client inflow against provider growth.
///
/// The imbalance is the relative demand growth `psi r f / D` minus `mu`,
/// applied to the served stock `S(t, p)`; it is converted into a price
/// movement through the coefficient selected by `slope_mode`. At a cleared
/// price (`D = S`) the imbalance equals `psi r f - mu S`.
pub fn price_slope<T: Real>(
    demand: &DemandSide<T>,
    supply: &SupplySide<T>,
    t: T,
    price: T,
    slope_mode: SlopeMode,
    mode: CurveMode,
) -> Result<T> {
    let params = supply.params();
    let flux = demand.demand_flux(t, price, mode)?;
    let dem = demand.demand_at(t, price, mode)?;
    let served = supply.supply_at(t, price, mode)?;
    let coefficient = match slope_mode {
        SlopeMode::Literal => {
            supply.marginal_density(t, price, mode)? / (params.n * params.beta * params.delta_c)
        }
        SlopeMode::CapacityBalance => supply.supply_price_derivative(t, price, mode)?,
    };
    if !(coefficient > T::zero()) || !(dem > T::zero()) {
        return Err(Error::SingularSlope {
            price: price.as_f64(),
        });
    }
    Ok((flux / dem - params.mu) * served / coefficient)
}
