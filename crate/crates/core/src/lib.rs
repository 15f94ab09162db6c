// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fractional_solver;
pub mod levy_kernel;
pub mod markov_core;
pub mod mc_engine;
pub mod quadrature;
pub mod reference_oracles;
pub mod subordinator_sim;

pub use error::{Error, Result};
pub use fractional_solver::{solve, CaputoWeights, SolveResult, SweepFamily, TimeGrid};
pub use levy_kernel::{LevyMeasure, LevySpec, MeanRate, MixtureComponent};
pub use markov_core::{ExitSample, ExitState, GeneratorModel};
pub use mc_engine::{McConfig, McEstimate, VerifierReport};
pub use reference_oracles::{
    mittag_leffler, EigenMode, Inversion, InversionConfig, InversionMethod,
};
