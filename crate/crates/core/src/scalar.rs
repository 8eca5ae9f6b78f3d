//! Scalar bounds for trust values.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_traits::{PrimInt, Unsigned};

/// An online-time value usable as the ordering key of a [`TrustTree`](crate::TrustTree).
///
/// Any unsigned primitive integer qualifies; `u64` is what the directory stores.
pub trait Trust: PrimInt + Unsigned + Hash + Debug + Display + Default + Send + Sync + 'static {}

impl<T> Trust for T where T: PrimInt + Unsigned + Hash + Debug + Display + Default + Send + Sync + 'static
{}
