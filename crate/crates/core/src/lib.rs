//! Spatial econometrics engine.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ingest`] loads attribute tables, polygon geometry and GAL neighbour files.
//! * [`weights`] builds contiguity and inverse-distance weights matrices and
//!   normalizes them.
//! * [`esda`] covers descriptive statistics, global and local Moran's I and the
//!   Lagrange-multiplier battery on OLS residuals.
//! * [`estimators`] fits OLS/SLX and the maximum-likelihood family
//!   (SEM, SAR, SDEM, SDM, SAC, GNS).
//! * [`effects`] decomposes a fit into direct, indirect and total impacts.
//! * [`dgp`] simulates the general nesting process for ground-truth testing.

pub mod dgp;
pub mod effects;
pub mod esda;
pub mod estimators;
pub mod ingest;
pub(crate) mod linalg;
pub mod rng;
pub mod stats;
pub mod weights;

pub use effects::{decompose_effects, EffectsTable};
pub use estimators::{fit, fit_ols, fit_spatial, log_det_term, FitResult, ModelKind, ModelSpec, SeMode};
pub use ingest::{AttributeTable, GeometrySet};
pub use weights::{NeighborGraph, Normalization, WeightsMatrix};
