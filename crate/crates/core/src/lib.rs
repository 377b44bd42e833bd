//! bddlkit: a toolkit for BDDL everyday-activity definitions.
//!
//! The crate parses and validates activity definitions (objects, initial
//! literals, goal formula), houses a synset knowledge base with property
//! inference, maintains an abstract box-geometry world with extended object
//! states (temperature, soaked/covered levels, toggled/sliced/broken flags,
//! substance particle systems), checks and samples logical predicates over
//! that world, applies transition rules, and runs scripted episodes with
//! symbolic action primitives, reporting success and efficiency metrics.

pub mod ast;
pub mod engine;
pub mod geom;
pub mod kb;
pub mod parser;
pub mod predicates;
pub mod rng;
pub mod sexp;
pub mod transitions;
pub mod validate;
pub mod world;

pub use ast::{ActivityDefinition, Formula, GroundLiteral, Polarity};
pub use engine::{EpisodeReport, Grounding, Primitive};
pub use kb::KnowledgeBase;
pub use validate::{Diagnostic, Severity};
pub use world::WorldState;
