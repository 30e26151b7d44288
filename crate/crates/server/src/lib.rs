//! The CAD server owns the model and builds candidate sets; the VH server
//! runs the high-rate nearest-candidate loop against hand updates.

pub mod cad;
pub mod mailbox;
pub mod vh;

pub use cad::{CadConfig, CadCore, CadServer, Outgoing, Target};
pub use mailbox::{Pose, PoseMailbox};
pub use vh::{VhConfig, VhServer};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("model: {0}")]
    Model(#[from] vrcad_core::ModelError),
    #[error("model mesh: {0}")]
    Build(#[from] vrcad_core::BuildError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type ClientId = u64;
