//! Moment matrix, occurrence vectors `z(j)` and binomial moments `s(j)`.
//!
//! For a fixed order `d` and `j ∈ J_d`, positions `u = 1..=n-d+1` stand for
//! "exactly `u + d - 1` events occur, including all of `A_{j_1}..A_{j_d}`".
//! The moment matrix `F` with entries `C(u+d-1, k+d-1)` maps the occurrence
//! vector `z(j)` onto the moment vector `s(j) = F z(j)`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, enumerate_index_tuples, factorial, falling_factorial, IndexTuple};
use crate::error::{arg, Error, Result};
use crate::scalar::Scalar;
use crate::system::EventSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix<T> {
    n: usize,
    d: usize,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> MomentMatrix<T> {
    /// `F` with `ell` rows and `n - d + 1` columns.
    ///
    /// `ell = 1` is accepted so the full square system exists when `d = n`.
    pub fn new(n: usize, d: usize, ell: usize) -> Result<Self> {
        if d > n {
            return Err(arg(format!("order d={d} exceeds n={n}")));
        }
        let width = n - d + 1;
        if ell == 0 || ell > width {
            return Err(arg(format!("ell={ell} outside 1..={width} for n={n}, d={d}")));
        }
        let rows = (1..=ell)
            .map(|k| {
                (1..=width)
                    .map(|i| binomial((i + d - 1) as u64, (k + d - 1) as u64))
                    .collect()
            })
            .collect();
        Ok(MomentMatrix { n, d, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ell(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns, `n - d + 1`.
    pub fn width(&self) -> usize {
        self.n - self.d + 1
    }

    /// `f_{k,i}`, both indices 1-based.
    pub fn entry(&self, k: usize, i: usize) -> &T {
        &self.rows[k - 1][i - 1]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    /// `F z`.
    pub fn apply(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.width() {
            return Err(arg(format!("vector of length {} does not match width {}", z.len(), self.width())));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().zip(z).map(|(f, x)| f.clone() * x.clone()).sum())
            .collect())
    }

    /// `F^T a`.
    pub fn apply_transpose(&self, a: &[T]) -> Result<Vec<T>> {
        if a.len() != self.ell() {
            return Err(arg(format!("vector of length {} does not match ell {}", a.len(), self.ell())));
        }
        Ok((0..self.width())
            .map(|i| self.rows.iter().zip(a).map(|(row, x)| row[i].clone() * x.clone()).sum())
            .collect())
    }
}

/// `z(j)`: entries `z_u = p_{u+d-1, j} / C(u+d-1, d)` for `u = 1..=n-d+1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZVector<T> {
    pub j: IndexTuple,
    pub values: Vec<T>,
}

pub fn z_vector<T: Scalar>(sys: &EventSystem<T>, j: &IndexTuple) -> Result<ZVector<T>> {
    j.validate(sys.n())?;
    let d = j.order();
    let values = (1..=sys.n() - d + 1)
        .map(|u| {
            let count = u + d - 1;
            let c: T = binomial(count as u64, d as u64);
            Ok(sys.exact_joint(count, j)? / c)
        })
        .collect::<Result<_>>()?;
    Ok(ZVector { j: j.clone(), values })
}

/// The moments `s_1(j), ..., s_ell(j)` attached to one index tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector<T> {
    pub j: IndexTuple,
    pub values: Vec<T>,
}

impl<T: Scalar> MomentVector<T> {
    /// `s_k(j)`, 1-based.
    pub fn s(&self, k: usize) -> &T {
        &self.values[k - 1]
    }

    pub fn ell(&self) -> usize {
        self.values.len()
    }

    pub fn d(&self) -> usize {
        self.j.order()
    }
}

/// Moments for every `j ∈ J_d`, in lexicographic order of `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSet<T> {
    n: usize,
    d: usize,
    ell: usize,
    vectors: Vec<MomentVector<T>>,
}

impl<T: Scalar> MomentSet<T> {
    /// Moments computed from an explicit system via the intersection sums.
    pub fn from_system(sys: &EventSystem<T>, d: usize, ell: usize) -> Result<Self> {
        check_ell(sys.n(), d, ell)?;
        let intersections = sys.intersection_probabilities();
        let vectors = enumerate_index_tuples(sys.n(), d)?
            .into_iter()
            .map(|j| moments_from_intersections(&intersections, sys.n(), j, ell))
            .collect();
        Ok(MomentSet { n: sys.n(), d, ell, vectors })
    }

    /// Moment-only ingestion. Every `j ∈ J_d` must appear exactly once; the
    /// values are only checked for nonnegativity and `s_1 <= 1`.
    pub fn from_vectors(n: usize, d: usize, ell: usize, mut vectors: Vec<MomentVector<T>>) -> Result<Self> {
        check_ell(n, d, ell)?;
        for v in &vectors {
            v.j.validate(n)?;
            if v.j.order() != d {
                return Err(arg(format!("tuple {} has order {} but d={d}", v.j, v.j.order())));
            }
            if v.values.len() != ell {
                return Err(arg(format!("tuple {} carries {} values, expected {ell}", v.j, v.values.len())));
            }
            if let Some(bad) = v.values.iter().find(|x| !x.is_nonnegative()) {
                return Err(arg(format!("tuple {} has negative moment {bad}", v.j)));
            }
            if !v.values[0].approx_le(&T::one()) {
                return Err(arg(format!("tuple {} has s_1 = {} > 1", v.j, v.values[0])));
            }
        }
        vectors.sort_by(|a, b| a.j.cmp(&b.j));
        let expected = enumerate_index_tuples(n, d)?;
        if vectors.len() != expected.len() || vectors.iter().zip(&expected).any(|(v, j)| v.j != *j) {
            return Err(arg(format!(
                "moment file must list every tuple of order {d} over {n} events exactly once ({} expected, {} given)",
                expected.len(),
                vectors.len()
            )));
        }
        Ok(MomentSet { n, d, ell, vectors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn vectors(&self) -> &[MomentVector<T>] {
        &self.vectors
    }

    /// The same moments restricted to orders `1..=ell`.
    pub fn truncate(&self, ell: usize) -> Result<Self> {
        if ell == 0 || ell > self.ell {
            return Err(arg(format!("cannot truncate ell={} to {ell}", self.ell)));
        }
        Ok(MomentSet {
            n: self.n,
            d: self.d,
            ell,
            vectors: self
                .vectors
                .iter()
                .map(|v| MomentVector { j: v.j.clone(), values: v.values[..ell].to_vec() })
                .collect(),
        })
    }

    pub fn matrix(&self) -> Result<MomentMatrix<T>> {
        MomentMatrix::new(self.n, self.d, self.ell)
    }
}

fn check_ell(n: usize, d: usize, ell: usize) -> Result<()> {
    if d > n {
        return Err(arg(format!("order d={d} exceeds n={n}")));
    }
    if ell == 0 || ell > n - d + 1 {
        return Err(arg(format!("ell={ell} outside 1..={} for n={n}, d={d}", n - d + 1)));
    }
    Ok(())
}

/// `s_k(j) = d!/(k+d-1)! · Σ P(A_{u_1} .. A_{u_{k-1}} A_{j_1} .. A_{j_d})` over
/// ordered tuples of distinct indices outside `j`, evaluated as `(k-1)!` times
/// the sum over unordered subsets.
fn moments_from_intersections<T: Scalar>(
    intersections: &[T],
    n: usize,
    j: IndexTuple,
    ell: usize,
) -> MomentVector<T> {
    let d = j.order();
    let base = j.mask();
    let outside: Vec<usize> = (0..n).filter(|k| base >> k & 1 == 0).collect();
    let values = (1..=ell)
        .map(|k| {
            let total: T = outside
                .iter()
                .combinations(k - 1)
                .map(|subset| intersections[(subset.iter().fold(base, |m, &&b| m | 1 << b)) as usize].clone())
                .sum();
            // d! (k-1)! / (k+d-1)! = 1 / C(k+d-1, d)
            total / binomial::<T>((k + d - 1) as u64, d as u64)
        })
        .collect();
    MomentVector { j, values }
}

/// Moments of one tuple from intersection probabilities.
pub fn moments_from_system<T: Scalar>(sys: &EventSystem<T>, j: &IndexTuple, ell: usize) -> Result<MomentVector<T>> {
    j.validate(sys.n())?;
    check_ell(sys.n(), j.order(), ell)?;
    Ok(moments_from_intersections(&sys.intersection_probabilities(), sys.n(), j.clone(), ell))
}

/// Moments of one tuple as normalized factorial moments:
/// `s_k(j) = d!/(k+d-1)! · E[(ξ - d)_{k-1} ; A_{j_1} .. A_{j_d}]`.
pub fn moments_via_factorial<T: Scalar>(sys: &EventSystem<T>, j: &IndexTuple, ell: usize) -> Result<MomentVector<T>> {
    j.validate(sys.n())?;
    let d = j.order();
    check_ell(sys.n(), d, ell)?;
    let need = j.mask();
    let values = (1..=ell)
        .map(|k| {
            let expectation: T = sys
                .support()
                .filter(|(mask, _)| mask & need == need)
                .map(|(mask, w)| {
                    let ff = falling_factorial(mask.count_ones() as i64 - d as i64, (k - 1) as u32);
                    w.clone() * T::from_i64(ff as i64)
                })
                .sum();
            expectation * T::from_u128(factorial(d as u32)) / T::from_u128(factorial((k + d - 1) as u32))
        })
        .collect();
    Ok(MomentVector { j: j.clone(), values })
}

/// Both sides of the decomposition of `p_r` and `P_r` into sums over `J_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport<T> {
    pub r: usize,
    pub d: usize,
    pub exactly: T,
    pub exactly_decomposed: T,
    pub at_least: T,
    pub at_least_decomposed: T,
}

/// Checks `p_r = Σ_j p_{r,j} / C(r,d)` and `P_r = Σ_j Σ_{i>=r} p_{i,j} / C(i,d)`.
pub fn verify_decomposition<T: Scalar>(sys: &EventSystem<T>, r: usize, d: usize) -> Result<DecompositionReport<T>> {
    let n = sys.n();
    if r > n || d > r {
        return Err(arg(format!("need 0 <= d <= r <= n (r={r}, d={d}, n={n})")));
    }
    let occurrence = sys.exact_occurrence();
    let tuples = enumerate_index_tuples(n, d)?;
    let mut exactly_decomposed = T::zero();
    let mut at_least_decomposed = T::zero();
    for j in &tuples {
        for i in r..=n {
            let term = sys.exact_joint(i, j)? / binomial::<T>(i as u64, d as u64);
            if i == r {
                exactly_decomposed = exactly_decomposed + term.clone();
            }
            at_least_decomposed = at_least_decomposed + term;
        }
    }
    let report = DecompositionReport {
        r,
        d,
        exactly: occurrence.exactly(r),
        exactly_decomposed,
        at_least: occurrence.at_least(r),
        at_least_decomposed,
    };
    if !report.exactly.approx_eq(&report.exactly_decomposed) || !report.at_least.approx_eq(&report.at_least_decomposed) {
        return Err(Error::InvariantViolation(format!(
            "decomposition mismatch at r={r}, d={d}: p_r {} vs {}, P_r {} vs {}",
            report.exactly, report.exactly_decomposed, report.at_least, report.at_least_decomposed
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn fair(n: usize) -> EventSystem<Rational> {
        EventSystem::normalize(n, (0..1u64 << n).map(|m| (m, q(1, 1)))).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| q(x, 1)).collect()
    }

    #[test]
    fn matrix_entries() {
        let f = MomentMatrix::<Rational>::new(3, 0, 2).unwrap();
        assert_eq!(f.rows(), &[ints(&[1, 1, 1, 1]), ints(&[0, 1, 2, 3])]);
        let f = MomentMatrix::<Rational>::new(3, 1, 2).unwrap();
        assert_eq!(f.rows(), &[ints(&[1, 2, 3]), ints(&[0, 1, 3])]);
        for n in 1..=8 {
            for d in 0..=n {
                let ell = n - d + 1;
                let f = MomentMatrix::<Rational>::new(n, d, ell).unwrap();
                for k in 1..=ell {
                    assert_eq!(f.entry(k, k), &q(1, 1));
                    for i in 1..k {
                        assert_eq!(f.entry(k, i), &q(0, 1));
                    }
                }
            }
        }
        assert!(MomentMatrix::<Rational>::new(3, 1, 4).is_err());
        assert!(MomentMatrix::<Rational>::new(3, 4, 1).is_err());
    }

    #[test]
    fn z_vectors() {
        let sys = fair(3);
        let z = z_vector(&sys, &IndexTuple::new(vec![1], 3).unwrap()).unwrap();
        assert_eq!(z.values, vec![q(1, 8), q(1, 8), q(1, 24)]);
        let z0 = z_vector(&sys, &IndexTuple::empty()).unwrap();
        assert_eq!(z0.values, sys.exact_occurrence().probabilities());

        let no_first = EventSystem::normalize(3, [(0b110, q(1, 1)), (0, q(1, 1))]).unwrap();
        let z = z_vector(&no_first, &IndexTuple::new(vec![1], 3).unwrap()).unwrap();
        assert!(z.values.iter().all(|x| *x == q(0, 1)));
    }

    #[test]
    fn fair_coin_moments() {
        let sys = fair(3);
        let s = moments_from_system(&sys, &IndexTuple::empty(), 3).unwrap();
        assert_eq!(s.values, vec![q(1, 1), q(3, 2), q(3, 4)]);
        let j = IndexTuple::new(vec![1], 3).unwrap();
        let s = moments_from_system(&sys, &j, 3).unwrap();
        assert_eq!(s.values, vec![q(1, 2), q(1, 4), q(1, 24)]);
        let f = moments_via_factorial(&sys, &j, 3).unwrap();
        assert_eq!(f.values[1], q(1, 4));
        assert_eq!(f, s);
    }

    #[test]
    fn three_routes_agree() {
        let sys = EventSystem::normalize(4, (0..16u64).map(|m| (m, q((m * 5 % 7) as i64, 1 + (m % 3) as i64)))).unwrap();
        for d in 0..=4 {
            let ell = 4 - d + 1;
            let f = MomentMatrix::new(4, d, ell).unwrap();
            for j in enumerate_index_tuples(4, d).unwrap() {
                let a = moments_from_system(&sys, &j, ell).unwrap();
                let b = moments_via_factorial(&sys, &j, ell).unwrap();
                let z = z_vector(&sys, &j).unwrap();
                assert_eq!(a, b);
                assert_eq!(f.apply(&z.values).unwrap(), a.values);
                assert_eq!(a.values[0], sys.intersection_probabilities()[j.mask() as usize]);
            }
        }
    }

    #[test]
    fn decomposition_examples() {
        let rep = verify_decomposition(&fair(2), 1, 1).unwrap();
        assert_eq!(rep.at_least, q(3, 4));
        assert_eq!(rep.at_least_decomposed, q(3, 4));
        let rep = verify_decomposition(&fair(3), 2, 2).unwrap();
        assert_eq!(rep.at_least_decomposed, q(1, 2));
        let rep = verify_decomposition(&fair(3), 2, 0).unwrap();
        assert_eq!(rep.exactly, rep.exactly_decomposed);
        assert!(verify_decomposition(&fair(3), 1, 2).is_err());
    }

    #[test]
    fn moment_only_validation() {
        let mv = |j: Vec<usize>, v: Vec<Rational>| MomentVector { j: IndexTuple::new(j, 2).unwrap(), values: v };
        let ok = MomentSet::from_vectors(2, 1, 2, vec![mv(vec![2], vec![q(1, 2), q(1, 4)]), mv(vec![1], vec![q(1, 2), q(1, 4)])]);
        let ok = ok.unwrap();
        assert_eq!(ok.vectors()[0].j.indices(), &[1]);
        assert!(MomentSet::from_vectors(2, 1, 2, vec![mv(vec![1], vec![q(1, 2), q(1, 4)])]).is_err());
        assert!(MomentSet::from_vectors(2, 1, 2, vec![mv(vec![1], vec![q(3, 2), q(1, 4)]), mv(vec![2], vec![q(1, 2), q(1, 4)])]).is_err());
        assert!(MomentSet::from_vectors(2, 1, 2, vec![mv(vec![1], vec![q(1, 2), q(-1, 4)]), mv(vec![2], vec![q(1, 2), q(1, 4)])]).is_err());
    }
}
