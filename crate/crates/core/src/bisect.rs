//! Exact bisection on a monotone feasibility predicate.

use num_traits::Signed;

use crate::error::{precondition, Result};
use crate::scalar::{mid, Q};

/// Bracket `(bad, good)` with `good − bad ≤ tol` for a predicate that holds
/// at `good` and fails at `bad`. `good` may lie on either side of `bad`.
pub fn bisect(
    mut bad: Q,
    mut good: Q,
    tol: &Q,
    mut feasible: impl FnMut(&Q) -> Result<bool>,
) -> Result<(Q, Q)> {
    if !tol.is_positive() {
        return Err(precondition("bisection tolerance must be positive"));
    }
    while (&good - &bad).abs() > *tol {
        let m = mid(&bad, &good);
        if feasible(&m)? {
            good = m;
        } else {
            bad = m;
        }
    }
    Ok((bad, good))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    #[test]
    fn brackets_a_threshold_from_both_sides() {
        let (bad, good) = bisect(qi(0), qi(1), &q(1, 1024), |x| Ok(*x >= q(1, 3))).unwrap();
        assert!(bad < q(1, 3) && q(1, 3) <= good && &good - &bad <= q(1, 1024));
        let (bad, good) = bisect(qi(1), qi(0), &q(1, 1024), |x| Ok(*x <= q(2, 3))).unwrap();
        assert!(good <= q(2, 3) && q(2, 3) < bad);
        assert!(bisect(qi(0), qi(1), &qi(0), |_| Ok(true)).is_err());
    }
}
