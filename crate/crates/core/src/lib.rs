//! Neighborhood-scale retrieval and recommendation over geotagged posts.
//!
//! Retrieval combines a strict-radius spatial filter, tag-graph expansion and
//! embedding similarity. Recommendation scores items by semantic match to a
//! time-weighted visit profile, distance decay and place popularity.

pub mod engine;
pub mod eval;
pub mod exec;
pub mod geo;
pub mod graph;
pub mod model;
pub mod pipeline;
pub mod recommend;
pub mod text;
pub mod vector;

pub use engine::{Clients, Engine, EngineConfig, EngineError, LayerToggles, Resources, RetrievalRequest};
pub use exec::Exec;
pub use model::{GeoEntity, GeoPoint, InfoItem, ItemId, KnowledgeBase, TimePoint, UserContext};
