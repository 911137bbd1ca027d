//! Artifact store, pipeline queue, REST API and command line for latent
//! concept analysis.
//!
//! Uploaded artifacts (corpus, token manifest, embeddings, tag files,
//! attributions) are validated and kept in a per-project directory tree
//! ([`store`]). A worker pool ([`queue`]) drives queued projects through
//! clustering, alignment and scoring ([`pipeline`]); results are served by
//! [`api`] or written to disk by [`local`], both through [`views`].

pub mod analysis;
pub mod api;
pub mod error;
pub mod fixture;
pub mod formats;
pub mod local;
pub mod pipeline;
pub mod queue;
pub mod store;
pub mod views;

pub use error::{Result, ServiceError};
pub use store::{NewProject, Project, Store};
