//! Concrete drift models: the Maier-Stein field, a gradient double well and the
//! biaxial spin-torque macrospin.

mod double_well;
mod macrospin;
mod maier_stein;

pub use double_well::{gradient_double_well, DoubleWell};
pub use macrospin::{
    classify_region, critical_current, critical_tilt_angle, Macrospin, PolarAxis, Region, SphericalChart,
    Vec3, CRITICAL_ANISOTROPY, POLE_EXCLUSION,
};
pub use maier_stein::{maier_stein_drift, MaierStein};
