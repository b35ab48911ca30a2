//! Kernel of an autonomous ML-engineering agent.
//!
//! A raw data folder flows through perception (file grouping, file and task
//! perception, library selection), a semantic memory of condensed tutorials,
//! an episodic memory of past iterations, and an iterative coding loop that
//! generates, executes and judges solution scripts in a sandboxed child
//! process. The [`evaluation`] module computes the benchmark aggregates
//! (success rate, average rank, relative time, medals) used to compare agents.

pub mod coding;
pub mod config;
pub mod episodic;
pub mod evaluation;
pub mod llm;
pub mod parse;
pub mod perception;
pub mod prompts;
pub mod registry;
pub mod sandbox;
pub mod semantic;
pub mod text;

pub use config::KernelConfig;
pub use llm::{Gateway, LlmBackend, LlmRequest, LlmResponse, ScriptedBackend};
pub use registry::ToolSpec;
