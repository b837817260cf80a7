//! HTTP API over planverify sessions.
//!
//! Every session is one JSON document in the store directory, written via a
//! temporary file and an atomic rename before the 2xx response is sent.
//! Mutations on one session are serialized with a per-session lock; a
//! request that finds the lock taken gets `409 session_busy` instead of
//! queueing. Distinct sessions proceed in parallel.

pub mod api;
pub mod error;
pub mod store;

pub use api::{router, AppState};
pub use error::ApiError;
pub use store::{SessionStore, StoreError};

pub const SESSION_SCHEMA: &str = include_str!("../../../schemas/session.schema.json");
pub const REPORT_SCHEMA: &str = include_str!("../../../schemas/report.schema.json");
pub const ERROR_SCHEMA: &str = include_str!("../../../schemas/error.schema.json");
