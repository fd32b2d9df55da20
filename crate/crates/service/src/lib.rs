//! HTTP+JSON service running interactive preference-elicitation sessions.
//!
//! Routes:
//!
//! * `POST /sessions` with `{"schema": .., "config": {..}}` and an optional
//!   `Idempotency-Key` header
//! * `GET /sessions/{id}/pending`
//! * `POST /sessions/{id}/answer` with `{"choice": "A" | "B", "step": n}`
//! * `GET /sessions/{id}/model`
//! * `POST /sessions/{id}/finish`
//! * `GET /sessions/{id}/trace`

pub mod api;
pub mod store;

pub use api::router;
pub use store::{Store, StoreError};
