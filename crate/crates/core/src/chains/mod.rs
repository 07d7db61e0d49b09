//! Contracting Markov chains `X_n = F_n(X_{n−1}, ε_n)` and their constants.

pub mod constants;
pub mod contraction;
pub mod functional;
pub mod model;
pub mod noise;

pub use constants::{derive_constants, g_moment, g_sup, hoeffding_noise};
pub use contraction::{verify_contraction, ContractionReport, ContractionRow};
pub use functional::FunctionalSpec;
pub use model::{
    make_model, simulate, AffineStep, ChainModel, ExampleSpec, InitLaw, Innovation, ModelSpec, Trajectory,
    UnitRootVariant,
};
pub use noise::NoiseSpec;
