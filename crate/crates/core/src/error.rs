use crate::directory::{PeerStatus, UserId};
use crate::tree::InvariantViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fanout must be at least 2, got {0}")]
    InvalidFanout(u64),

    #[error("node count must be at least 1, got {0}")]
    InvalidNodeCount(u64),

    #[error("duplicate user id {0}")]
    DuplicatePeer(UserId),

    #[error("unknown user id {0}")]
    UnknownPeer(UserId),

    #[error("peer {id} is already {status}")]
    InvalidTransition { id: UserId, status: PeerStatus },

    #[error("peer {id}: session started at {started} but clock reads {now}")]
    ClockWentBackwards { id: UserId, started: u64, now: u64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("tree invariant violated: {0}")]
    Invariant(#[from] InvariantViolation),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
