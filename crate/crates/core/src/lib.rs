//! Feature-oriented repository summarization.
//!
//! `reposum-core` turns a Java source tree into a catalog of feature and epic
//! documents, then scores those documents against ground truth. The pipeline
//! runs in four phases, each persisting a versioned JSON artifact:
//!
//! 1. **Analyze** — parse sources into a [`repo_graph::RepoModel`]: files,
//!    classes, methods, resolved call and import edges.
//! 2. **Summarize** — produce method- and file-level summaries through an
//!    LLM [`gateway`], bottom-up so callee summaries ground their callers.
//! 3. **Cluster** — group methods into features and features into epics with
//!    Leiden community detection under the constant Potts model
//!    ([`cluster`]), blending structural adjacency with summary similarity.
//! 4. **Docgen** — render feature and epic documents ([`feature_doc`]).
//!
//! The [`eval`] module implements the evaluation protocol: a two-stage
//! LLM-as-a-judge coverage comparison, trace-link precision/recall, commit
//! linking (`Link@k`), and inter-rater agreement statistics.
//!
//! Everything is deterministic for a fixed seed and provider: iteration
//! orders are pinned, artifacts serialize with stable field and key order,
//! and the stub provider is a pure function of its prompts. The `parallel`
//! feature (on by default) runs the data-parallel inner loops on rayon;
//! disabling it yields a dependency-free sequential build with identical
//! outputs.

pub mod artifact;
pub mod cluster;
pub mod config;
pub mod embed;
pub mod eval;
pub mod exec;
pub mod feature_doc;
pub mod gateway;
pub mod pipeline;
pub mod repo_graph;
pub mod summarize;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, PhaseSelection, PipelineError};
