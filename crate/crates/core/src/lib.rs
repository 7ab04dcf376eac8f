//! Uncertainty-aware schema linking for text-to-SQL.
//!
//! The pipeline elicits several plausible SQL hypotheses for a question,
//! grounds each one to tables and fields, consolidates the selections with
//! Beta-posterior credibility voting, and refines the uncertain items through
//! a tool-calling agent loop over a four-level evidence hierarchy. Linked
//! schemas are scored against gold labels derived from reference SQL by AST
//! scope analysis.

pub mod catalog;
pub mod consolidate;
pub mod dbadapter;
pub mod error;
pub mod evalmetrics;
pub mod grounding;
pub mod hypothesis;
pub mod llmio;
pub mod pipeline;
pub mod refine;
pub mod sqlgold;
pub mod util;

pub use catalog::{
    EvidenceLevel, FieldProfile, ItemKind, ProfileStore, SchemaCatalog, SchemaItemId,
};
pub use consolidate::{credibility, BucketedSets, VoteTally};
pub use error::{Error, Result};
pub use evalmetrics::{Granularity, InstanceScore, MetricReport};
pub use hypothesis::{Hypothesis, HypothesisSet};
pub use llmio::{Backend, BackendConfig, ChatMessage, Role, ToolCall, Usage};
pub use refine::{LinkedSchema, RefinementState};
pub use sqlgold::GoldSchema;
