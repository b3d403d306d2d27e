//! Binomial coefficients, falling factorials and the index tuples `J_d`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::scalar::Scalar;

/// `C(u, v)` as an exact integer, `None` on `u128` overflow.
pub fn binomial_u128(u: u64, v: u64) -> Option<u128> {
    if v > u {
        return Some(0);
    }
    let v = v.min(u - v);
    let mut acc: u128 = 1;
    for i in 0..v {
        // acc * (u - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul((u - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `C(u, v) = (u)_v / v!`, zero when `v > u`.
pub fn binomial<T: Scalar>(u: u64, v: u64) -> T {
    match binomial_u128(u, v) {
        Some(c) => T::from_u128(c),
        None => {
            let v = v.min(u - v);
            (0..v).fold(T::one(), |acc, i| {
                acc * T::from_u128((u - i) as u128) / T::from_u128(i as u128 + 1)
            })
        }
    }
}

/// `(x)_k = x (x - 1) ... (x - k + 1)`; `(x)_0 = 1`.
pub fn falling_factorial(x: i64, k: u32) -> i128 {
    (0..k as i64).map(|i| (x - i) as i128).product()
}

pub fn factorial(k: u32) -> u128 {
    (1..=k as u128).product()
}

/// A strictly increasing tuple `(j_1, ..., j_d)` of 1-based event indices.
/// The empty tuple is the single element of `J_0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexTuple(Vec<usize>);

impl IndexTuple {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.iter().any(|&j| j == 0 || j > n) {
            return Err(arg(format!("index tuple {indices:?} has entries outside 1..={n}")));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(arg(format!("index tuple {indices:?} is not strictly increasing")));
        }
        Ok(IndexTuple(indices))
    }

    pub fn empty() -> Self {
        IndexTuple(Vec::new())
    }

    /// The order `d`.
    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Atom bitmask with bit `j - 1` set for every member.
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &j| m | 1 << (j - 1))
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        IndexTuple::new(self.0.clone(), n).map(|_| ())
    }
}

impl std::fmt::Display for IndexTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// All `C(n, d)` elements of `J_d` in lexicographic order.
pub fn enumerate_index_tuples(n: usize, d: usize) -> Result<Vec<IndexTuple>> {
    if d > n {
        return Err(arg(format!("order d={d} exceeds n={n}")));
    }
    Ok((1..=n).combinations(d).map(IndexTuple).collect())
}
