//! Two-species competition on a finite chain of patches with edge behaviour.
//!
//! Each species diffuses inside every patch and crosses an interface with a
//! density jump `u(x_i⁺) = p_i u(x_i⁻)` and balanced flux. The crate computes
//! the resident's steady state, the principal eigenvalue that decides
//! invasion when rare, long-time competitive outcomes, and the
//! ideal-free-distribution based classification of parameter pairs.
//!
//! Numerical code is generic over [`Scalar`] (`f32`/`f64`); the aliases at the
//! crate root fix `f64`.

pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod identities;
pub mod invasion;
pub mod landscape;
pub mod operator;
pub mod scalar;
pub mod steady;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use dynamics::{
    classify_outcome, order_preservation_check, simulate, step, CompetitionSystem, OrderCheck,
    OutcomeRecord, Scheme, SimConfig, SimState, Verdict,
};
pub use eigen::{
    assemble_linearization, invasion_fitness, principal_eigenpair, EigenConfig, EigenPair,
    Stability,
};
pub use grid::{build_grid, integrate_field, Grid, PiecewiseField, Resolution};
pub use identities::{
    coexistence_identity_residual, fitness_identity_residual, CoexistenceResiduals,
    IdentityResidual,
};
pub use invasion::{
    cross_validate, css_check, ess_check, nis_check, pip, predict_outcome, stability_table,
    Agreement, GlobalVerdict, InvadeWhenRare, PipGrid, Prediction, SampledCertificate,
    TwoPatchSetup,
};
pub use landscape::{
    classify_region, derive_jump_ratios, ifd_strategy, strict_dominates, CompetitionModel,
    Landscape, PatchEnvironment, RegionLabel, SpeciesTraits, StrategyVector,
};
pub use operator::{assemble_diffusion, LinearOperator, Tridiagonal};
pub use steady::{
    monotonicity_report, solve_resident_steady, MonotonicityReport, SteadyConfig, Trend,
};
pub use transform::{
    pull_back, push_forward, solve_steady_finite_volume, to_transformed, TransformedProblem,
};

/// Double-precision aliases.
pub type Landscape64 = Landscape<f64>;
pub type PatchEnvironment64 = PatchEnvironment<f64>;
pub type SpeciesTraits64 = SpeciesTraits<f64>;
pub type StrategyVector64 = StrategyVector<f64>;
pub type CompetitionModel64 = CompetitionModel<f64>;
pub type Grid64 = Grid<f64>;
pub type Field64 = PiecewiseField<f64>;
pub type LinearOperator64 = LinearOperator<f64>;
pub type EigenPair64 = EigenPair<f64>;
pub type EigenConfig64 = EigenConfig<f64>;
pub type SteadyConfig64 = SteadyConfig<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type OutcomeRecord64 = OutcomeRecord<f64>;
pub type TwoPatchSetup64 = TwoPatchSetup<f64>;
pub type TransformedProblem64 = TransformedProblem<f64>;

/// Single-precision aliases for the types most often used in reduced-precision runs.
pub type Landscape32 = Landscape<f32>;
pub type Field32 = PiecewiseField<f32>;
pub type CompetitionModel32 = CompetitionModel<f32>;
