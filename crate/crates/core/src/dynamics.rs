//! Market paths over time.
//!
//! Starting from the cleared market at `t = 0`, the price is held flat
//! while the market is emerging and integrated downward from the flow
//! balance while it is mature. The regime is re-evaluated every step.

use rayon::prelude::*;

use crate::calibration::{anchored, AnchorConditions};
use crate::curves::{CurveMode, DemandSide, SupplySide};
use crate::equilibrium::{
    classify_regime, entry_rate, exit_rate, price_slope, solve_equilibrium, Regime, SlopeMode,
    SolveOptions,
};
use crate::error::{Error, Result};
use crate::model::{ModelParams, PARAM_NAMES};
use crate::numerics::rk4_step;
use crate::scalar::Real;

pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig<T> {
    pub params: ModelParams<T>,
    pub mode: SlopeMode,
    pub horizon: T,
    pub dt: T,
    /// When present, `F0` and `g0` are re-derived from these before running.
    pub anchors: Option<AnchorConditions<T>>,
}

impl<T: Real> ScenarioConfig<T> {
    pub fn new(params: ModelParams<T>) -> Self {
        ScenarioConfig {
            params,
            mode: SlopeMode::CapacityBalance,
            horizon: T::lit(DEFAULT_HORIZON),
            dt: T::lit(DEFAULT_DT),
            anchors: None,
        }
    }

    pub fn with_anchors(mut self, anchors: AnchorConditions<T>) -> Self {
        self.anchors = Some(anchors);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::InvalidParams(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.dt > T::zero() && self.dt <= self.horizon) {
            return Err(Error::InvalidParams(format!(
                "dt must lie in (0, horizon], got {}",
                self.dt
            )));
        }
        Ok(())
    }

    /// Parameters the simulation actually runs with (anchored if requested).
    pub fn effective_params(&self) -> Result<ModelParams<T>> {
        match &self.anchors {
            Some(a) => anchored(&self.params, a),
            None => self.params.validated(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint<T> {
    pub t: T,
    pub price: T,
    pub price_slope: T,
    pub regime: Regime,
    pub required_share: T,
    pub marginal_size: T,
    pub demand: T,
    pub supply: T,
    pub entry_rate: Option<T>,
    pub exit_rate: Option<T>,
    /// Provider size above which profits grow despite the price decline;
    /// `None` when no provider can keep up (`mu = 0` with falling prices).
    pub profit_frontier: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub params: ModelParams<T>,
    pub mode: SlopeMode,
    pub points: Vec<TrajectoryPoint<T>>,
    /// Time of the step that would have pushed the price to the cost floor.
    pub floor_reached: Option<T>,
}

/// Aggregates of a completed path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<T> {
    pub price0: T,
    pub required_share0: T,
    pub marginal_size0: T,
    pub final_price: T,
    /// Compound annual price change, percent per year.
    pub price_drift_pct: T,
    /// Mean yearly increase of the required offshore share, percentage points.
    pub share_gain_pp: T,
    /// Providers that exited over the whole path.
    pub total_exits: T,
}

impl<T: Real> Trajectory<T> {
    /// `None` for paths stopped at the cost floor.
    pub fn summary(&self) -> Option<Summary<T>> {
        if self.floor_reached.is_some() || self.points.len() < 2 {
            return None;
        }
        let first = self.points.first()?;
        let last = self.points.last()?;
        let span = last.t - first.t;
        let hundred = T::lit(100.0);
        let half = T::lit(0.5);
        let total_exits = self
            .points
            .windows(2)
            .map(|w| {
                let k = |p: &TrajectoryPoint<T>| p.exit_rate.unwrap_or_else(T::zero);
                half * (k(&w[0]) + k(&w[1])) * (w[1].t - w[0].t)
            })
            .fold(T::zero(), |a, b| a + b);
        Some(Summary {
            price0: first.price,
            required_share0: first.required_share,
            marginal_size0: first.marginal_size,
            final_price: last.price,
            price_drift_pct: ((last.price / first.price).powf(T::one() / span) - T::one()) * hundred,
            share_gain_pp: (last.required_share - first.required_share) / span * hundred,
            total_exits,
        })
    }
}

fn point_at<T: Real>(
    demand: &DemandSide<T>,
    supply: &SupplySide<T>,
    mode: SlopeMode,
    t: T,
    price: T,
) -> Result<TrajectoryPoint<T>> {
    let cm = CurveMode::Closed;
    let params = supply.params();
    let regime = classify_regime(demand, supply, t, price, cm)?.tag;
    let (slope, entry, exit) = match regime {
        Regime::Emerging => (T::zero(), Some(entry_rate(demand, supply, t, cm)?), None),
        Regime::Mature => {
            let slope = price_slope(demand, supply, t, price, mode, cm)?;
            let exit = exit_rate(supply, t, price, slope.min(T::zero()), cm)?;
            (slope, None, Some(exit))
        }
    };
    let profit_frontier = match params.profitability_threshold_size(slope) {
        Ok(e) => Some(e),
        Err(Error::NoProviderOutruns { .. }) => None,
        Err(e) => return Err(e),
    };
    let share = (params.local_cost() - price) / (params.n * params.delta_c);
    Ok(TrajectoryPoint {
        t,
        price,
        price_slope: slope,
        regime,
        required_share: share.max(T::zero()).min(T::one()),
        marginal_size: params.min_viable_size(price)?,
        demand: demand.demand_at(t, price, cm)?,
        supply: supply.supply_at(t, price, cm)?,
        entry_rate: entry,
        exit_rate: exit,
        profit_frontier,
    })
}

enum StepError {
    Floor,
    Failed(Error),
}

/// Simulates the market over `config.horizon` with fixed steps of `config.dt`
/// (the last step is shortened if the horizon is not a multiple of `dt`).
pub fn simulate<T: Real>(config: &ScenarioConfig<T>) -> Result<Trajectory<T>> {
    config.validate()?;
    let params = config.effective_params()?;
    let demand = DemandSide::new(params)?;
    let supply = SupplySide::new(params)?;
    let opts = SolveOptions {
        slope_mode: config.mode,
        ..SolveOptions::default()
    };
    let start = solve_equilibrium(&demand, &supply, T::zero(), &opts)?;

    let ratio = (config.horizon / config.dt).as_f64();
    let steps = ((ratio - 1e-9).ceil() as usize).max(1);
    let floor = params.cost_floor();
    let mut points = Vec::with_capacity(steps + 1);
    let mut floor_reached = None;
    let mut price = start.price;

    for i in 0..=steps {
        let t = if i == steps {
            config.horizon
        } else {
            config.dt * T::lit(i as f64)
        };
        let point = point_at(&demand, &supply, config.mode, t, price)?;
        points.push(point);
        if i == steps {
            break;
        }
        if point.regime == Regime::Emerging {
            continue;
        }
        let t_next = if i + 1 == steps {
            config.horizon
        } else {
            config.dt * T::lit((i + 1) as f64)
        };
        let step = rk4_step(
            |s, p| {
                if !(p > floor) {
                    return Err(StepError::Floor);
                }
                let slope = price_slope(&demand, &supply, s, p, config.mode, CurveMode::Closed)
                    .map_err(StepError::Failed)?;
                if slope.is_finite() {
                    Ok(slope)
                } else {
                    Err(StepError::Failed(Error::NonFinite {
                        t: s.as_f64(),
                        price: p.as_f64(),
                        value: slope.as_f64(),
                    }))
                }
            },
            t,
            price,
            t_next - t,
        );
        match step {
            Ok(next) if next > floor => price = next,
            Ok(_) | Err(StepError::Floor) => {
                floor_reached = Some(t_next);
                break;
            }
            Err(StepError::Failed(e)) => return Err(e),
        }
    }

    Ok(Trajectory {
        params,
        mode: config.mode,
        points,
        floor_reached,
    })
}

/// Grid of values for one named parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + self.step * i as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if !PARAM_NAMES.contains(&self.name.as_str()) && self.name != "f0" {
            return Err(Error::InvalidParams(format!(
                "cannot sweep unknown parameter `{}` (expected one of {})",
                self.name,
                PARAM_NAMES.join(", ")
            )));
        }
        if !(self.step > 0.0) || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sweep range {}:{}:{} needs lo <= hi and step > 0",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for SweepSpec {
    type Err = Error;

    /// Parses `name=lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("sweep spec `{s}` is not name=lo:hi:step"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [lo, hi, step] = parts[..] else {
            return Err(bad());
        };
        let spec = SweepSpec {
            name: name.trim().to_string(),
            lo,
            hi,
            step,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub value: T,
    /// Failed points carry the error message.
    pub outcome: std::result::Result<Summary<T>, String>,
}

/// Runs one simulation per grid value of the swept parameter. Points are
/// evaluated in parallel and returned in parameter order.
pub fn sweep<T: Real>(base: &ScenarioConfig<T>, vary: &SweepSpec) -> Result<Vec<SweepRow<T>>> {
    vary.validate()?;
    base.validate()?;
    let rows = vary
        .values()
        .into_par_iter()
        .map(|v| {
            let value = T::lit(v);
            let outcome = (|| {
                let mut config = *base;
                config.params.set(&vary.name, value)?;
                let traj = simulate(&config)?;
                traj.summary().ok_or_else(|| {
                    Error::Data(format!(
                        "cost floor reached at t = {}",
                        traj.floor_reached.unwrap_or_else(T::zero)
                    ))
                })
            })()
            .map_err(|e| e.to_string());
            SweepRow { value, outcome }
        })
        .collect();
    Ok(rows)
}
