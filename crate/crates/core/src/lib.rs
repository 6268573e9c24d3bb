//! Trilingual entity discovery and linking.

pub mod codec;
pub mod corpus;
pub mod detect;
pub mod eval;
pub mod kb;
pub mod link;
pub mod neural;
pub mod nil;
pub mod pipeline;
pub mod synth;
