//! Trust-ordered session-key distribution for peer-to-peer groups.
//!
//! Peers are ranked by cumulative online time and laid out in a complete
//! d-ary tree with the most trusted peers nearest the root. Every membership
//! change makes the key distribution center issue a new session key, which
//! the controlling server injects at the current root and which then spreads
//! one tree level per time unit.
//!
//! The crate is split into:
//!
//! * [`height`]: closed-form height and level calculators.
//! * [`tree`]: the [`TrustTree`] itself, generic over the trust scalar.
//! * [`directory`]: the lookup table of peer records and its CSV format.
//! * [`keying`]: KDC, controlling server and the propagation engine.
//! * [`simulator`]: seeded churn simulation and metric files.
//! * [`verify`]: a self-contained invariant suite used by the CLI.

pub mod directory;
pub mod error;
pub mod height;
pub mod keying;
pub mod scalar;
pub mod simulator;
pub mod tree;
pub mod verify;

pub use directory::{LookupTable, PeerRecord, PeerStatus, UserId};
pub use error::{Error, Result};
pub use height::{eq1_height_bound, levels};
pub use keying::{ControllingServer, Kdc, LatencyConfig, RekeyReport, SessionKey, Trigger};
pub use scalar::Trust;
pub use simulator::{coverage_curve, run, SimConfig, SimMetrics, TimeDistribution};
pub use tree::{DepartureClass, InvariantViolation, JoinOutcome, LeaveOutcome, Peer, RankValue, TrustTree};

/// Tree keyed by 64-bit online times, the width used by the directory and simulator.
pub type TrustTree64 = TrustTree<u64>;
/// Tree keyed by 32-bit online times.
pub type TrustTree32 = TrustTree<u32>;
pub type Peer64 = Peer<u64>;
pub type Peer32 = Peer<u32>;
