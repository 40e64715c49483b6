//! Synthesis of periodic planar rf electrodes for lattices of ion microtraps.
//!
//! The electrode plane is cut into patch electrodes whose rf amplitudes
//! `a_i ∈ [0, 1]` are chosen by a linear program that maximizes the common
//! curvature scale `C` of a set of field-free microtraps. The resulting
//! electrode map can then be analysed for curvatures, trap depths and
//! spurious minima of the ponderomotive pseudopotential.
//!
//! Numeric code is generic over [`Real`]; the aliases at the crate root fix
//! the scalar to `f64`, which is what the CLI and the tolerances assume.

pub mod analysis;
pub mod constraints;
pub mod error;
mod fft;
pub mod field;
pub mod lattice;
pub mod optimize;
pub mod patterns;
pub mod scalar;
pub mod synthesis;

pub use error::{Error, Result};
pub use scalar::Real;

pub type BravaisLattice = lattice::BravaisLattice<f64>;
pub type PatchGrid = lattice::PatchGrid<f64>;
pub type FourierBasis = field::FourierBasis<f64>;
pub type ElectrodeField<'a> = field::ElectrodeField<'a, f64>;
pub type FieldSample = field::FieldSample<f64>;
pub type Position = field::Position<f64>;
pub type TrapSpec = constraints::TrapSpec<f64>;
pub type ExtraConstraint = constraints::ExtraConstraint<f64>;
pub type ConstraintSystem = constraints::ConstraintSystem<f64>;
pub type OptimizationResult = optimize::OptimizationResult<f64>;
pub type PseudoGrid = analysis::PseudoGrid<f64>;
