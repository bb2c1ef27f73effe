//! Verification orchestration for Dafny programs.

pub mod bench;
pub mod dafny;
pub mod engine;
pub mod llm;
pub mod model;
pub mod refactor;
pub mod verifier;
