//! Uncertainty-driven clarifying questions for chat language models.
//!
//! The engine samples several answers to a query, measures how much their
//! embeddings disagree, and when the disagreement exceeds a threshold asks
//! the user a handful of clarifying questions chosen by an active-learning
//! strategy before answering the augmented query.

pub mod backends;
pub mod engine;
pub mod eval;
pub mod model;
pub mod selection;
pub mod uncertainty;

pub use engine::{Engine, EngineError, OracleChannel, SessionObserver, UserChannel};
pub use model::{
    AugmentedQuery, ClarifyingQuestion, Demonstration, Embedding, FeedbackItem, InquiryConfig, SessionRecord,
    SessionState, Strategy, UserQuery,
};
