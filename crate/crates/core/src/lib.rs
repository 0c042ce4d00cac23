//! Recovery of column-sparse (and low-rank) matrices from Gaussian linear
//! measurements by ℓ₁,₂ minimization.
//!
//! * [`matrix`]: dense matrices, polar decomposition `Z = z.H`, norms, subspaces.
//! * [`operators`]: the measurement map `𝒜`, its blocks and spectral quantities.
//! * [`solvers`]: ℓ₁,₂, support-restricted nuclear, streamlined and vector ℓ₁ programs.
//! * [`certificates`]: exact and soft recovery certificates, energy and range bounds.
//! * [`statdim`]: statistical-dimension measurement thresholds.
//! * [`recovery`]: NAST and Column Streamlining.
//! * [`experiments`]: random instances, trial sweeps and figure data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod operators;
pub mod recovery;
pub mod rng;
pub mod solvers;
pub mod statdim;

pub use certificates::{EnergyBounds, ExactCertReport, RangePartition, SoftCertReport};
pub use error::{Error, Result};
pub use experiments::{Algorithm, Figure, InstanceSpec, ResultTable, SweepConfig, TrialRecord, TrialSettings};
pub use matrix::{DenseMatrix, PolarMatrix, Subspace, SupportSet};
pub use operators::{MeasurementOp, MeasurementVector};
pub use recovery::{NastConfig, NastOutcome, StopReason, StreamlineConfig, StreamlineOutcome};
pub use solvers::{Engine, PreparedOp, SolveResult, SolverConfig, StepSize, VectorSolveResult};
pub use statdim::{ConeParams, ThresholdResult, ThresholdRow};
