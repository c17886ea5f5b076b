use std::fmt;
use std::str::FromStr;

use super::fisher::ln_factorials;
use crate::config::DirectionTest;
use crate::error::{Error, Result};

/// Preferred temporal order of a condition pair `(c1, c2)` with `c1 < c2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `c1` is typically diagnosed first.
    Forward,
    /// `c2` is typically diagnosed first.
    Backward,
    Undirected,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Undirected => "undirected",
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
            Direction::Undirected => Direction::Undirected,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "undirected" => Ok(Direction::Undirected),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
fn upper_tail_half(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let lnf = ln_factorials(n as usize);
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    // sum from the far tail inward so small terms accumulate first
    (k..=n)
        .rev()
        .map(|j| (lnf[n as usize] - lnf[j as usize] - lnf[(n - j) as usize] - ln_half_n).exp())
        .sum()
}

/// Exact binomial test of `n_fwd` against `n_bwd` under a 1/2 null.
///
/// Two-sided p doubles the upper tail at `k = max(n_fwd, n_bwd)` and caps at 1.
/// The one-sided variant reports the upper tail alone.
pub fn binomial_direction_test(
    n_fwd: u64,
    n_bwd: u64,
    direction_alpha: f64,
    sidedness: DirectionTest,
) -> Result<(f64, Direction)> {
    let n = n_fwd + n_bwd;
    if n == 0 {
        return Err(Error::invalid("binomial direction test with zero ordered patients"));
    }
    let k = n_fwd.max(n_bwd);
    let tail = upper_tail_half(n, k);
    let p = match sidedness {
        DirectionTest::TwoSided => (2.0 * tail).min(1.0),
        DirectionTest::OneSided => tail.min(1.0),
    };
    let direction = if p < direction_alpha && n_fwd > n_bwd {
        Direction::Forward
    } else if p < direction_alpha && n_bwd > n_fwd {
        Direction::Backward
    } else {
        Direction::Undirected
    };
    Ok((p, direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_oracles::binomial_doubled_tail;
    use proptest::prelude::*;

    fn two_sided(a: u64, b: u64) -> (f64, Direction) {
        binomial_direction_test(a, b, 0.05, DirectionTest::TwoSided).unwrap()
    }

    #[test]
    fn symmetric_counts_are_undirected() {
        assert_eq!(two_sided(5, 5), (1.0, Direction::Undirected));
    }

    #[test]
    fn ten_to_zero_is_forward() {
        let (p, dir) = two_sided(10, 0);
        assert!((p - 0.001953125).abs() < 1e-16, "{p}");
        assert_eq!(dir, Direction::Forward);
        let (q, back) = two_sided(0, 10);
        assert_eq!((q, back), (p, Direction::Backward));
    }

    #[test]
    fn seven_to_three_is_undirected() {
        let (p, dir) = two_sided(7, 3);
        assert!((p - 0.34375).abs() < 1e-15, "{p}");
        assert_eq!(dir, Direction::Undirected);
    }

    #[test]
    fn zero_trials_is_error() {
        assert!(binomial_direction_test(0, 0, 0.05, DirectionTest::TwoSided).is_err());
    }

    #[test]
    fn one_sided_is_half_of_two_sided_below_cap() {
        let (p1, _) = binomial_direction_test(9, 1, 0.05, DirectionTest::OneSided).unwrap();
        let (p2, _) = two_sided(9, 1);
        assert!((2.0 * p1 - p2).abs() < 1e-15);
    }

    #[test]
    fn matches_exact_tail_for_large_n() {
        // 40 of 45 ordered patients going one way
        let (p, dir) = two_sided(40, 5);
        assert!((p - binomial_doubled_tail(45, 40)).abs() < 1e-15);
        assert_eq!(dir, Direction::Forward);
    }

    proptest! {
        #[test]
        fn mirrored_counts_mirror_direction(a in 0u64..200, b in 0u64..200) {
            prop_assume!(a + b > 0);
            let (p, d) = two_sided(a, b);
            let (q, e) = two_sided(b, a);
            prop_assert_eq!(p, q);
            prop_assert_eq!(d.mirrored(), e);
            prop_assert!((0.0..=1.0).contains(&p));
            if d != Direction::Undirected {
                prop_assert!(p < 0.05);
            }
        }
    }
}
