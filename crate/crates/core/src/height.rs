//! Height calculators for d-ary trees.
//!
//! Two different quantities live here and they do not agree in general:
//!
//! * [`eq1_height_bound`] is the classic worst-case B-tree height,
//!   `floor(log_d((n + 1) / 2))`.
//! * [`levels`] is the height of the complete d-ary tree holding `n`
//!   single-peer nodes, which is what a [`TrustTree`](crate::TrustTree)
//!   actually has. For `n = 333, d = 2` the former is 7 and the latter 8.

use num_traits::{PrimInt, Unsigned};

use crate::error::{Error, Result};

fn check_fanout<I: PrimInt>(d: I) -> Result<()> {
    if d < I::one() + I::one() {
        return Err(Error::InvalidFanout(d.to_u64().unwrap_or(0)));
    }
    Ok(())
}

/// Worst-case B-tree height `floor(log_d((n + 1) / 2))`, evaluated exactly.
///
/// Returns the largest `h` with `2 * d^h <= n + 1`.
pub fn eq1_height_bound<I: PrimInt + Unsigned>(n: I, d: I) -> Result<u32> {
    check_fanout(d)?;
    if n < I::one() {
        return Err(Error::InvalidNodeCount(0));
    }
    // 2 * d^h <= n + 1  <=>  d^h <= floor((n + 1) / 2) = n - n / 2
    let two = I::one() + I::one();
    let limit = n - n / two;
    let mut power = I::one();
    let mut h = 0;
    while let Some(next) = power.checked_mul(&d) {
        if next > limit {
            break;
        }
        power = next;
        h += 1;
    }
    Ok(h)
}

/// Height of the complete d-ary tree with `n` nodes: the smallest `h` with
/// `(d^(h+1) - 1) / (d - 1) >= n`. Zero for `n <= 1`.
pub fn levels<I: PrimInt + Unsigned>(n: I, d: I) -> Result<u32> {
    check_fanout(d)?;
    let mut capacity = I::one();
    let mut width = I::one();
    let mut h = 0;
    while capacity < n {
        h += 1;
        match width.checked_mul(&d) {
            Some(w) => {
                width = w;
                capacity = capacity.saturating_add(width);
            }
            // the next level alone exceeds the type's range, so it holds n
            None => break,
        }
    }
    Ok(h)
}
