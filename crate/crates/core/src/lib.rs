//! Numerical laboratory for the Type (i) boundary Yamabe problem on
//! cohomogeneity-one models: discrete energy, constrained minimization,
//! spectral analysis at critical points, Lyapunov–Schmidt reduction, and
//! empirical quantitative-stability fits.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod disc;
pub mod energy;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod lsred;
pub mod minimize;
pub mod model;
pub mod spectrum;
pub mod stability;

pub use disc::{assemble_operators, build_grid, lp_norm, DiscreteOperators, Grid, GridKind};
pub use energy::{
    el_residual, gradient, hessian_form, metric_distance, metric_distance_star, normalize,
    project_tangent, yamabe_quotient, ElResidual, EnergyReport, NormalizedState,
};
pub use error::{Error, Result};
pub use lsred::{
    detect_integrability, fit_growth_exponent, Integrability, ReducedSample, ReductionChart,
};
pub use minimize::{estimate_yamabe_constant, minimize_energy, MinimizeOptions, MinimizeReport};
pub use model::{
    conformal_deform, make_model, Endpoint, ModelSpec, Profile, SymmetricModel, Topology,
};
pub use spectrum::{eigen_decompose, kernel_split, KernelSplit, SpectrumReport};
pub use stability::{
    distance_to_minimizers, fit_stability_exponent, sample_deficit_distance, MinimizerFamily,
    PerturbationBasis, PerturbationKind, SamplingSpec, StabilityFit, StabilityRecord,
};
