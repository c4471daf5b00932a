//! Plan-work-solve orchestration for tool-augmented language models, with an
//! interleaved thought/action/observation baseline, exact token accounting
//! and a replayable benchmark harness.

pub mod accounting;
pub mod blueprint;
pub mod cli;
pub mod config;
pub mod engine;
pub mod evaluation;
pub mod model;
pub mod prompting;
pub mod tools;
pub mod trajectory;
