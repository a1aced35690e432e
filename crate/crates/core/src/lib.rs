//! Bayesian spatial variable selection for scalar-on-image regression.
//!
//! Each voxel j carries an inclusion indicator γ_j and a coefficient β_j.
//! The indicators follow an Ising prior on the voxel lattice, so selected
//! voxels cluster in space. The coefficients of selected voxels follow a
//! Dirichlet process, so nearby effects can share one value. A blocked Gibbs
//! sampler explores the posterior. The [`hyperbounds`] module chooses Ising
//! parameters that avoid the phase transition.
//!
//! The numerical core is generic over [`Real`] (`f32`, `f64`). The region
//! algebra is generic over [`BoundScalar`], which includes exact
//! `BigRational`. The aliases below fix the common choices.

// `!(x > lo)` is how NaN gets rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod hyperbounds;
pub mod io;
pub mod lattice;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod scalar;
pub mod simgen;

pub use error::{Error, Result};
pub use hyperbounds::{
    bounds, bounds_2d, bounds_3d, bounds_3d_relaxed, max_simple_r2, recommend_ab, sparsity_side_length,
    BoundsInput, BoundsMode, HyperRegion, Membership, Recommendation, RegionRecord,
};
pub use lattice::{build_lattice, LatticeGraph, VoxelCoord};
pub use model::{
    ChainState, Dataset, DesignMatrix, DpConfig, IsingParams, PriorKind,
};
pub use num_rational::BigRational;
pub use sampler::{run_chain, run_parallel, ChainTrace, SamplerConfig};
pub use scalar::{parse_decimal, BoundScalar, Real};

pub type Dataset32 = Dataset<f32>;
pub type Dataset64 = Dataset<f64>;
pub type SamplerConfig32 = SamplerConfig<f32>;
pub type SamplerConfig64 = SamplerConfig<f64>;
pub type ChainTrace32 = ChainTrace<f32>;
pub type ChainTrace64 = ChainTrace<f64>;
pub type Region = HyperRegion<f64>;
pub type ExactRegion = HyperRegion<BigRational>;
pub type ExactBoundsInput = BoundsInput<BigRational>;
