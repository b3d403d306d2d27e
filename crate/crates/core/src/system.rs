//! Finite event systems and the exact enumeration oracle.
//!
//! An [`EventSystem`] is a probability measure on the `2^n` atoms generated by
//! events `A_1, ..., A_n`. Atom keys are little-endian bitmasks: bit `k - 1`
//! is set exactly when `A_k` occurs. The number of occurring events on an atom
//! is its popcount.

use serde::Serialize;

use crate::combinatorics::IndexTuple;
use crate::error::{arg, Error, Result};
use crate::scalar::Scalar;

/// Largest `n` accepted for explicit-atom systems.
pub const MAX_EVENTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct EventSystem<T> {
    n: usize,
    /// Normalized weight of every atom, indexed by mask.
    weights: Vec<T>,
    /// Total mass of the measure before normalization.
    total_mass: T,
}

impl<T: Scalar> EventSystem<T> {
    /// Builds a probability measure from nonnegative atom weights by dividing
    /// through by their total. Omitted masks carry weight zero. The original
    /// total is kept so bounds can be mapped back onto the finite measure.
    pub fn normalize<I>(n: usize, weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, T)>,
    {
        if n == 0 || n > MAX_EVENTS {
            return Err(arg(format!("event count n={n} outside 1..={MAX_EVENTS}")));
        }
        let atoms = 1usize << n;
        let mut dense = vec![T::zero(); atoms];
        for (mask, w) in weights {
            if mask as usize >= atoms {
                return Err(arg(format!("atom mask {mask} out of range for n={n}")));
            }
            if w < T::zero() {
                return Err(arg(format!("atom {mask} has negative weight {w}")));
            }
            let slot = &mut dense[mask as usize];
            *slot = slot.clone() + w;
        }
        let total: T = dense.iter().cloned().sum();
        if !(total > T::zero()) {
            return Err(Error::DegenerateMeasure("total weight is zero".into()));
        }
        let weights = dense.into_iter().map(|w| w / total.clone()).collect();
        Ok(EventSystem { n, weights, total_mass: total })
    }

    /// Like [`normalize`](Self::normalize) but insists the weights already
    /// form a probability measure (within tolerance).
    pub fn from_probabilities<I>(n: usize, weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, T)>,
    {
        let sys = Self::normalize(n, weights)?;
        if !sys.total_mass.approx_eq(&T::one()) {
            return Err(arg(format!(
                "weights sum to {} rather than 1; request normalization explicitly",
                sys.total_mass
            )));
        }
        Ok(sys)
    }

    /// Product measure of independent events with the given probabilities.
    pub fn independent(probabilities: &[T]) -> Result<Self> {
        let n = probabilities.len();
        if probabilities.iter().any(|p| *p < T::zero() || *p > T::one()) {
            return Err(arg("event probabilities must lie in [0, 1]"));
        }
        let atoms = (0..1u64 << n).map(|mask| {
            let w = probabilities.iter().enumerate().fold(T::one(), |acc, (k, p)| {
                if mask >> k & 1 == 1 {
                    acc * p.clone()
                } else {
                    acc * (T::one() - p.clone())
                }
            });
            (mask, w)
        });
        Self::normalize(n, atoms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, mask: u64) -> &T {
        &self.weights[mask as usize]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Atoms with positive weight, as `(mask, weight)`.
    pub fn support(&self) -> impl Iterator<Item = (u64, &T)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(m, w)| (m as u64, w))
    }

    pub fn total_mass(&self) -> &T {
        &self.total_mass
    }

    /// Maps a probability of the normalized system back onto the original measure.
    pub fn denormalize(&self, value: &T) -> T {
        value.clone() * self.total_mass.clone()
    }

    /// `p_i = P(exactly i events occur)` for `i = 0..=n`.
    pub fn exact_occurrence(&self) -> OccurrenceDistribution<T> {
        let mut p = vec![T::zero(); self.n + 1];
        for (mask, w) in self.support() {
            let i = mask.count_ones() as usize;
            p[i] = p[i].clone() + w.clone();
        }
        OccurrenceDistribution { p }
    }

    /// `P_r = P(at least r events occur)` for `1 <= r <= n`.
    pub fn exact_at_least(&self, r: usize) -> Result<T> {
        if r == 0 || r > self.n {
            return Err(arg(format!("r={r} outside 1..={}", self.n)));
        }
        Ok(self
            .support()
            .filter(|(mask, _)| mask.count_ones() as usize >= r)
            .map(|(_, w)| w.clone())
            .sum())
    }

    /// `p_{i,j} = P(B_i ∩ A_{j_1} ∩ ... ∩ A_{j_d})`.
    pub fn exact_joint(&self, i: usize, j: &IndexTuple) -> Result<T> {
        j.validate(self.n)?;
        if i > self.n {
            return Err(arg(format!("i={i} exceeds n={}", self.n)));
        }
        if i < j.order() {
            return Ok(T::zero());
        }
        let need = j.mask();
        Ok(self
            .support()
            .filter(|(mask, _)| mask.count_ones() as usize == i && mask & need == need)
            .map(|(_, w)| w.clone())
            .sum())
    }

    /// `P(A_k)` for a single 1-based event index.
    pub fn event_probability(&self, k: usize) -> Result<T> {
        if k == 0 || k > self.n {
            return Err(arg(format!("event index {k} outside 1..={}", self.n)));
        }
        Ok(self
            .support()
            .filter(|(mask, _)| mask >> (k - 1) & 1 == 1)
            .map(|(_, w)| w.clone())
            .sum())
    }

    /// `P(∩_{k ∈ S} A_k)` for every mask `S`, via a superset-sum transform.
    pub fn intersection_probabilities(&self) -> Vec<T> {
        let mut g = self.weights.clone();
        for bit in 0..self.n {
            for mask in 0..g.len() {
                if mask >> bit & 1 == 0 {
                    let upper = g[mask | 1 << bit].clone();
                    g[mask] = g[mask].clone() + upper;
                }
            }
        }
        g
    }

    /// The measure restricted to `atoms` and renormalized: the conditional
    /// probability given the event formed by those atoms.
    pub fn restrict(&self, atoms: &[u64]) -> Result<Self> {
        let sys = Self::normalize(
            self.n,
            atoms.iter().map(|&m| {
                let w = self.weights.get(m as usize).cloned().unwrap_or_else(T::zero);
                (m, w)
            }),
        )?;
        Ok(sys)
    }

    /// Relabels events: event `k` of `self` becomes event `perm[k - 1]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n || perm.iter().any(|&p| p == 0 || p > self.n || std::mem::replace(&mut seen[p - 1], true)) {
            return Err(arg("relabeling must be a permutation of 1..=n"));
        }
        let atoms = self.weights.iter().enumerate().map(|(mask, w)| {
            let image = (0..self.n)
                .filter(|&k| mask >> k & 1 == 1)
                .fold(0u64, |acc, k| acc | 1 << (perm[k] - 1));
            (image, w.clone())
        });
        Self::normalize(self.n, atoms)
    }
}

/// The law of the number of occurring events: `p[i] = P(B_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccurrenceDistribution<T> {
    p: Vec<T>,
}

impl<T: Scalar> OccurrenceDistribution<T> {
    pub fn probabilities(&self) -> &[T] {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    pub fn exactly(&self, i: usize) -> T {
        self.p.get(i).cloned().unwrap_or_else(T::zero)
    }

    /// `Σ_{i >= r} p[i]`; equals 1 for `r = 0`.
    pub fn at_least(&self, r: usize) -> T {
        self.p.iter().skip(r).cloned().sum()
    }
}
