//! Market model for professional-services providers that displace labor
//! to cheaper remote locations.
//!
//! The numeric core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod config;
pub mod curves;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod numerics;
pub mod scalar;

pub use curves::CurveMode;
pub use equilibrium::{Regime, SlopeMode};
pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type ModelParams = model::ModelParams<f64>;
pub type ProviderBounds = model::ProviderBounds<f64>;
pub type DensityGrid = numerics::DensityGrid<f64>;
pub type Bracket = numerics::Bracket<f64>;
pub type DemandSide = curves::DemandSide<f64>;
pub type SupplySide = curves::SupplySide<f64>;
pub type EquilibriumResult = equilibrium::EquilibriumResult<f64>;
pub type RegimeLabel = equilibrium::RegimeLabel<f64>;
pub type ScenarioConfig = dynamics::ScenarioConfig<f64>;
pub type TrajectoryPoint = dynamics::TrajectoryPoint<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type AnchorConditions = calibration::AnchorConditions<f64>;

/// Single precision variants.
pub mod f32 {
    pub type ModelParams = crate::model::ModelParams<f32>;
    pub type DemandSide = crate::curves::DemandSide<f32>;
    pub type SupplySide = crate::curves::SupplySide<f32>;
    pub type EquilibriumResult = crate::equilibrium::EquilibriumResult<f32>;
    pub type ScenarioConfig = crate::dynamics::ScenarioConfig<f32>;
    pub type Trajectory = crate::dynamics::Trajectory<f32>;
}
