//! Operator assistant: sessions over a live simulated grid, served as
//! HTTP/JSON.
//!
//! ```text
//! POST /api/sessions                  {grid, chronic, mode?, alpha?, config?}
//! GET  /api/sessions/{id}/state
//! POST /api/sessions/{id}/advance     {steps}
//! GET  /api/sessions/{id}/candidates
//! POST /api/sessions/{id}/simulate    {action}
//! POST /api/sessions/{id}/apply       {candidate_id} | {action}
//! GET  /api/sessions/{id}/audit
//! ```
//!
//! Failed requests answer with `{code, message, detail}`.

pub mod api;
pub mod error;
pub mod registry;
pub mod session;

pub use api::{router, serve, AppState};
pub use error::ServiceError;
pub use registry::Registry;
pub use session::{ApplyRequest, Mode, Recommendation, Session, SessionRequest, Snapshot};
