//! Relation representations for word pairs, learned from a text encoder and a
//! graph attention network over sememe relation graphs.
//!
//! Pipeline: [`lexicon`] reads sememe annotations, [`relgraph`] builds the
//! sememe graph and per-pair subgraphs, [`gat`] encodes a subgraph into a
//! relation vector, [`textenc`] encodes the prompt, [`training`] aligns the two
//! and [`evalkit`] answers analogy questions. [`autodiff`] supplies gradients.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod evalkit;
pub mod gat;
pub mod lexicon;
pub mod model;
pub mod relgraph;
pub mod textenc;
pub mod training;

pub use error::{Error, Result};
pub use model::{PreparedPair, RelationModel, SememeKnowledge, WordPair};
