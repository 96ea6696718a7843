//! Particle dynamics of self-attention on the unit sphere.
//!
//! The crate covers the softmax (SA) and unnormalized (USA) attention flows,
//! their interaction energy, metastability certificates for separated
//! configurations, the rescaled dynamics that produce an energy staircase on
//! the circle, and transport of atomic measures in the mean-field limit.
//! [`verify`] bundles the end-to-end checks used by the acceptance suite and
//! the CLI.

pub mod dynamics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod initgen;
pub mod meanfield;
pub mod metastability;
pub mod ode;
pub mod renorm;
pub mod scalar_oracles;
pub mod tolerance;
pub mod verify;

pub use dynamics::{
    integrate, integrate_angular, AngularFlow, AngularTrajectory, IntegratorSpec, Model, ModelKind, Scheme,
    TraceRecord, Trajectory,
};
pub use energy::EnergyValue;
pub use error::{Error, Result};
pub use geometry::{AngularConfiguration, CapFamily, Configuration, UnitVector};
pub use meanfield::MeasureCertificate;
pub use metastability::{LambdaWindow, SeparationCertificate, TheoreticalTimes};
pub use renorm::{MergeEvent, StaircaseProfile};
