//! Query-driven inference in belief networks whose nodes may describe their
//! dependence on parents with algebraic local expressions (`*`, `+`, `-` over
//! partial distributions), including efficient noisy-or evaluation.

pub mod cli;
pub mod engine;
pub mod error;
pub mod eval;
pub mod expr;
pub mod factor;
pub mod generate;
pub mod network;
pub mod oracle;
pub mod partition;
pub mod rewrite;

pub use engine::{query_marginal, Engine, Query};
pub use error::{Error, Result};
pub use expr::{parse, print, Assignment, Bindings, DistRef, Expression};
pub use factor::{Factor, ScopeEntry, Variable};
pub use network::{load_network, BeliefNetwork, LocalModel, NetworkBuilder};
pub use partition::{build_default_partition_tree, PartitionTree};
