//! Layered sequent calculi for K5 and its extensions.

pub mod formula;
pub mod generate;
pub mod interpolation;
pub mod kripke;
pub mod multiformula;
pub mod prover;
pub mod sequent;
pub mod verification;

pub use formula::{parse, Atom, Formula, Literal, ParseError};
pub use kripke::{sample_models, FrameClass, KripkeModel, ModelError, Shape};
pub use multiformula::{
    eval_multi, to_scnf, to_sdnf, Interpretation, MultiError, Multiformula,
};
pub use prover::{decide, is_valid, prove, Decision, ProofTree, RuleId, SearchOutcome};
pub use sequent::{is_saturated, unsaturated_items, Item, Label, LayeredSequent, Obligation};
pub use interpolation::{
    uniform_interpolant, uniform_lyndon_interpolant, uniform_lyndon_interpolant_in,
    uniform_lyndon_interpolant_with,
    Interpolation, InterpolationError, InterpolationOptions,
};
pub use verification::{
    check_bisim, check_uip, check_ulip, copy_world, find_bisim, BisimMode, BisimWitness, UlipConfig,
    UlipReport, VerifyError,
};
