//! Linear stability and dissipativity analysis.

pub mod dissipation;
pub mod stability;

pub use dissipation::{amplification, gamma_family, locate_dissipativity_landmarks, DissipativityLandmarks, Stencil};
pub use stability::{
    implicit_stability_closed_form, limit_class, scan_stability_region, stability_value, z_left, LimitClass,
    StabilityFunction, StabilityRegionReport, ZLeft,
};
