//! Generic dual certificates over the moment matrix.
//!
//! Given positions `i = (i_1 < ... < i_ell)` and a 0/1 target vector `v`, the
//! coefficient vector `a` solves `F_i^T a = v_i`. With `b = F^T a`:
//!
//! * `b <= v` componentwise  ⇒  `s^T a` is a lower bound for `z^T v`,
//! * `b >= v` componentwise  ⇒  `s^T a` is an upper bound.
//!
//! The witness `z*` solves `F_i z*_i = s` and vanishes off `i`; whenever it is
//! nonnegative it is an occurrence vector with the same moments that attains
//! the bound.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, binomial_u128, IndexTuple};
use crate::error::{arg, not_applicable, Error, Result};
use crate::moments::MomentMatrix;
use crate::scalar::Scalar;
use crate::system::EventSystem;

/// Hard cap on the number of index sets `search_index_sets` will visit.
pub const MAX_INDEX_SETS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `P_r`: at least `r` events occur.
    AtLeast,
    /// `p_r`: exactly `r` events occur.
    Exactly,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        })
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Target::AtLeast => "at-least",
            Target::Exactly => "exactly",
        })
    }
}

/// The 0/1 vector `v` over positions `1..=n-d+1` selecting the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetVector {
    target: Target,
    r: usize,
    d: usize,
    values: Vec<bool>,
}

impl TargetVector {
    pub fn new(target: Target, n: usize, r: usize, d: usize) -> Result<Self> {
        if d > r || r > n {
            return Err(arg(format!("need d <= r <= n (d={d}, r={r}, n={n})")));
        }
        let first = r - d + 1;
        let values = (1..=n - d + 1)
            .map(|u| match target {
                Target::AtLeast => u >= first,
                Target::Exactly => u == first,
            })
            .collect();
        Ok(TargetVector { target, r, d, values })
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.values
    }

    /// `v_u`, 1-based.
    pub fn get<T: Scalar>(&self, u: usize) -> T {
        if self.values[u - 1] {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn values<T: Scalar>(&self) -> Vec<T> {
        (1..=self.len()).map(|u| self.get(u)).collect()
    }
}

/// Strictly increasing 1-based positions into the columns of `F`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(positions: Vec<usize>, width: usize) -> Result<Self> {
        if positions.iter().any(|&p| p == 0 || p > width) || positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(arg(format!("index set {positions:?} is not strictly increasing within 1..={width}")));
        }
        Ok(IndexSet(positions))
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Solves the square system `A x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when `A` is singular.
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let abs = |x: &T| if *x < T::zero() { -x.clone() } else { x.clone() };
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| abs(&a[p][col]).partial_cmp(&abs(&a[q][col])).unwrap_or(std::cmp::Ordering::Equal))?;
        if a[pivot][col].is_zero_tol() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if a[row][col] == T::zero() {
                continue;
            }
            let factor = a[row][col].clone() / a[col][col].clone();
            for k in col..n {
                let delta = factor.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - delta;
            }
            let delta = factor * b[col].clone();
            b[row] = b[row].clone() - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let tail: T = (row + 1..n).map(|k| a[row][k].clone() * x[k].clone()).sum();
        x[row] = (b[row].clone() - tail) / a[row][row].clone();
    }
    Some(x)
}

fn check_square<T: Scalar>(f: &MomentMatrix<T>, i: &IndexSet) -> Result<()> {
    if i.len() != f.ell() {
        return Err(arg(format!("index set of size {} for ell={}", i.len(), f.ell())));
    }
    if i.positions().iter().any(|&p| p == 0 || p > f.width()) {
        return Err(arg(format!("index set {:?} exceeds width {}", i.positions(), f.width())));
    }
    Ok(())
}

/// Solves `F_i^T a = v_i`.
pub fn solve_coefficients<T: Scalar>(f: &MomentMatrix<T>, i: &IndexSet, v: &TargetVector) -> Result<Vec<T>> {
    check_square(f, i)?;
    if v.len() != f.width() {
        return Err(arg(format!("target vector of length {} for width {}", v.len(), f.width())));
    }
    let system = i
        .positions()
        .iter()
        .map(|&p| (1..=f.ell()).map(|k| f.entry(k, p).clone()).collect())
        .collect();
    let rhs = i.positions().iter().map(|&p| v.get(p)).collect();
    solve_dense(system, rhs).ok_or_else(|| Error::DegenerateIndexSet(i.positions().to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    /// `b <= v`: `s^T a` bounds the target from below.
    LowerFeasible,
    /// `b >= v`: `s^T a` bounds the target from above.
    UpperFeasible,
    /// `b = v`: the bound is an identity.
    Both,
    Infeasible,
}

impl Feasibility {
    pub fn admits(self, side: Side) -> bool {
        matches!(
            (self, side),
            (Feasibility::Both, _) | (Feasibility::LowerFeasible, Side::Lower) | (Feasibility::UpperFeasible, Side::Upper)
        )
    }
}

/// Compares `b = F^T a` with `v` componentwise.
pub fn check_feasibility<T: Scalar>(f: &MomentMatrix<T>, a: &[T], v: &TargetVector) -> Result<Feasibility> {
    if v.len() != f.width() {
        return Err(arg(format!("target vector of length {} for width {}", v.len(), f.width())));
    }
    let b = f.apply_transpose(a)?;
    let mut below = true;
    let mut above = true;
    for (u, bu) in b.iter().enumerate() {
        let vu: T = v.get(u + 1);
        below &= bu.approx_le(&vu);
        above &= bu.approx_ge(&vu);
    }
    Ok(match (below, above) {
        (true, true) => Feasibility::Both,
        (true, false) => Feasibility::LowerFeasible,
        (false, true) => Feasibility::UpperFeasible,
        (false, false) => Feasibility::Infeasible,
    })
}

/// `Z* = s^T a`.
pub fn bound_value<T: Scalar>(s: &[T], a: &[T]) -> Result<T> {
    if s.len() != a.len() {
        return Err(arg(format!("moment vector of length {} against {} coefficients", s.len(), a.len())));
    }
    Ok(s.iter().zip(a).map(|(x, y)| x.clone() * y.clone()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessWitness<T> {
    pub index_set: IndexSet,
    /// `z*` over all `n - d + 1` positions; zero off the index set.
    pub z: Vec<T>,
    pub nonnegative: bool,
}

/// Solves `F_i z*_i = s` with `z*` zero off `i`.
pub fn sharpness_witness<T: Scalar>(f: &MomentMatrix<T>, i: &IndexSet, s: &[T]) -> Result<SharpnessWitness<T>> {
    check_square(f, i)?;
    if s.len() != f.ell() {
        return Err(arg(format!("moment vector of length {} for ell={}", s.len(), f.ell())));
    }
    let system = (1..=f.ell())
        .map(|k| i.positions().iter().map(|&p| f.entry(k, p).clone()).collect())
        .collect();
    let sub = solve_dense(system, s.to_vec()).ok_or_else(|| Error::DegenerateIndexSet(i.positions().to_vec()))?;
    let mut z = vec![T::zero(); f.width()];
    for (&p, value) in i.positions().iter().zip(sub) {
        z[p - 1] = value;
    }
    let nonnegative = z.iter().all(|x| x.is_nonnegative());
    Ok(SharpnessWitness { index_set: i.clone(), z, nonnegative })
}

/// A single dual certificate for one moment vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexedBound<T> {
    pub index_set: IndexSet,
    pub coefficients: Vec<T>,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome<T> {
    pub best: IndexedBound<T>,
    /// Every index set whose coefficients are feasible for the side, in
    /// lexicographic order.
    pub feasible: Vec<IndexSet>,
}

/// A feasible index set with its solved coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleSet<T> {
    pub index_set: IndexSet,
    pub coefficients: Vec<T>,
}

/// Every `ell`-subset of positions whose coefficients are feasible for
/// `side`, in lexicographic order. Independent of the moments, so one call
/// serves every `j`.
pub fn feasible_coefficients<T: Scalar>(f: &MomentMatrix<T>, v: &TargetVector, side: Side) -> Result<Vec<FeasibleSet<T>>> {
    let count = binomial_u128(f.width() as u64, f.ell() as u64).unwrap_or(u128::MAX);
    if count > MAX_INDEX_SETS {
        return Err(Error::Resource(format!("{count} index sets exceed the cap of {MAX_INDEX_SETS}")));
    }
    let mut out = Vec::new();
    for positions in (1..=f.width()).combinations(f.ell()) {
        let i = IndexSet(positions);
        let a = match solve_coefficients(f, &i, v) {
            Ok(a) => a,
            Err(Error::DegenerateIndexSet(_)) => continue,
            Err(e) => return Err(e),
        };
        if check_feasibility(f, &a, v)?.admits(side) {
            out.push(FeasibleSet { index_set: i, coefficients: a });
        }
    }
    Ok(out)
}

/// The tightest of precomputed feasible sets for `s` (ties go to the earliest).
pub fn best_feasible<T: Scalar>(feasible: &[FeasibleSet<T>], s: &[T], side: Side) -> Result<IndexedBound<T>> {
    let mut best: Option<(usize, T)> = None;
    for (idx, fs) in feasible.iter().enumerate() {
        let value = bound_value(s, &fs.coefficients)?;
        let better = match &best {
            None => true,
            Some((_, b)) => match side {
                Side::Upper => value < *b,
                Side::Lower => value > *b,
            },
        };
        if better {
            best = Some((idx, value));
        }
    }
    let (idx, value) = best.ok_or_else(|| not_applicable(format!("no index set is {side}-feasible")))?;
    let fs = &feasible[idx];
    Ok(IndexedBound { index_set: fs.index_set.clone(), coefficients: fs.coefficients.clone(), value })
}

/// Visits every `ell`-subset of positions, keeps those whose coefficients are
/// feasible for `side`, and returns the tightest (ties go to the
/// lexicographically first index set).
pub fn search_index_sets<T: Scalar>(
    f: &MomentMatrix<T>,
    v: &TargetVector,
    s: &[T],
    side: Side,
) -> Result<SearchOutcome<T>> {
    if s.len() != f.ell() {
        return Err(arg(format!("moment vector of length {} for ell={}", s.len(), f.ell())));
    }
    let feasible = feasible_coefficients(f, v, side)?;
    let best = best_feasible(&feasible, s, side)?;
    Ok(SearchOutcome { best, feasible: feasible.into_iter().map(|fs| fs.index_set).collect() })
}

/// With `ell = n - d + 1` the system is square and the "bound" is an identity
/// expressing `z^T v` through the moments.
pub fn jordan_exact<T: Scalar>(f: &MomentMatrix<T>, v: &TargetVector, s: &[T]) -> Result<T> {
    if f.ell() != f.width() {
        return Err(arg(format!("full system needs ell = {} (got {})", f.width(), f.ell())));
    }
    let all = IndexSet((1..=f.width()).collect());
    let a = solve_coefficients(f, &all, v)?;
    bound_value(s, &a)
}

/// Realizes a nonnegative witness for tuple `j` as an explicit event system.
///
/// Position `u` receives mass `z*_u · C(u+d-1, d)` on the atom made of `j`
/// plus the first `u - 1` events outside `j`; any remaining probability goes
/// to the empty atom. The resulting system has `z(j) = z*`.
pub fn induced_system<T: Scalar>(
    witness: &SharpnessWitness<T>,
    n: usize,
    j: &IndexTuple,
) -> Result<EventSystem<T>> {
    j.validate(n)?;
    let d = j.order();
    if witness.z.len() != n - d + 1 {
        return Err(arg("witness length does not match n - d + 1"));
    }
    if !witness.nonnegative {
        return Err(arg("only nonnegative witnesses induce a distribution"));
    }
    let base = j.mask();
    let outside: Vec<usize> = (0..n).filter(|k| base >> k & 1 == 0).collect();
    let mut atoms = Vec::with_capacity(witness.z.len() + 1);
    let mut mass = T::zero();
    for (u0, z) in witness.z.iter().enumerate() {
        let weight = z.clone() * binomial::<T>((u0 + d) as u64, d as u64);
        let mask = outside[..u0].iter().fold(base, |m, &k| m | 1 << k);
        mass = mass.clone() + weight.clone();
        atoms.push((mask, weight));
    }
    let rest = T::one() - mass;
    if rest.is_negative() {
        return Err(arg(format!("witness carries mass above one ({rest} short)")));
    }
    if d > 0 {
        atoms.push((0, rest));
    }
    // Float noise may leave tiny negative weights on exact zeros.
    let atoms = atoms
        .into_iter()
        .map(|(m, w)| (m, if w < T::zero() { T::zero() } else { w }));
    EventSystem::normalize(n, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn set(p: &[usize]) -> IndexSet {
        IndexSet(p.to_vec())
    }

    fn f30() -> MomentMatrix<Rational> {
        MomentMatrix::new(3, 0, 2).unwrap()
    }

    #[test]
    fn target_vectors() {
        let v = TargetVector::new(Target::AtLeast, 3, 1, 0).unwrap();
        assert_eq!(v.bits(), &[false, true, true, true]);
        let v = TargetVector::new(Target::Exactly, 4, 2, 1).unwrap();
        assert_eq!(v.bits(), &[false, true, false, false]);
        assert!(TargetVector::new(Target::AtLeast, 3, 1, 2).is_err());
    }

    #[test]
    fn two_by_two_solves() {
        let v = TargetVector::new(Target::AtLeast, 3, 1, 0).unwrap();
        assert_eq!(solve_coefficients(&f30(), &set(&[1, 2]), &v).unwrap(), vec![q(0, 1), q(1, 1)]);
        assert_eq!(solve_coefficients(&f30(), &set(&[2, 4]), &v).unwrap(), vec![q(1, 1), q(0, 1)]);
        let v = TargetVector::new(Target::AtLeast, 3, 3, 0).unwrap();
        assert_eq!(solve_coefficients(&f30(), &set(&[1, 2]), &v).unwrap(), vec![q(0, 1), q(0, 1)]);
        assert!(solve_coefficients(&f30(), &set(&[1]), &v).is_err());
    }

    #[test]
    fn feasibility() {
        let v = TargetVector::new(Target::AtLeast, 3, 1, 0).unwrap();
        assert_eq!(check_feasibility(&f30(), &[q(0, 1), q(1, 1)], &v).unwrap(), Feasibility::UpperFeasible);
        assert_eq!(check_feasibility(&f30(), &[q(0, 1), q(-1, 1)], &v).unwrap(), Feasibility::LowerFeasible);
        let zero = TargetVector::new(Target::Exactly, 3, 0, 0).unwrap();
        assert_eq!(check_feasibility(&f30(), &[q(1, 1), q(-1, 1)], &zero).unwrap(), Feasibility::LowerFeasible);
        assert_eq!(check_feasibility(&f30(), &[q(0, 1), q(1, 1)], &zero).unwrap(), Feasibility::Infeasible);
        assert!(Feasibility::Both.admits(Side::Upper) && Feasibility::Both.admits(Side::Lower));
    }

    #[test]
    fn values() {
        let s = [q(1, 1), q(3, 2)];
        assert_eq!(bound_value(&s, &[q(0, 1), q(1, 1)]).unwrap(), q(3, 2));
        assert_eq!(bound_value(&s, &[q(1, 1), q(0, 1)]).unwrap(), q(1, 1));
        assert_eq!(bound_value(&s, &[q(0, 1), q(0, 1)]).unwrap(), q(0, 1));
        assert!(bound_value(&s, &[q(0, 1)]).is_err());
    }

    #[test]
    fn witnesses() {
        let s = [q(1, 1), q(3, 2)];
        let w = sharpness_witness(&f30(), &set(&[2, 4]), &s).unwrap();
        assert_eq!(w.z, vec![q(0, 1), q(3, 4), q(0, 1), q(1, 4)]);
        assert!(w.nonnegative);
        let sys = induced_system(&w, 3, &IndexTuple::empty()).unwrap();
        assert_eq!(sys.exact_at_least(1).unwrap(), q(1, 1));

        let w = sharpness_witness(&f30(), &set(&[1, 2]), &s).unwrap();
        assert_eq!(w.z, vec![q(-1, 2), q(3, 2), q(0, 1), q(0, 1)]);
        assert!(!w.nonnegative);
        assert!(induced_system(&w, 3, &IndexTuple::empty()).is_err());

        // A column of F is reproduced by the unit vector at that column.
        let col: Vec<Rational> = (1..=2).map(|k| f30().entry(k, 3).clone()).collect();
        let w = sharpness_witness(&f30(), &set(&[1, 3]), &col).unwrap();
        assert_eq!(w.z, vec![q(0, 1), q(0, 1), q(1, 1), q(0, 1)]);
    }

    #[test]
    fn exhaustive_search() {
        let v = TargetVector::new(Target::AtLeast, 3, 1, 0).unwrap();
        let s = [q(1, 1), q(3, 2)];
        let out = search_index_sets(&f30(), &v, &s, Side::Upper).unwrap();
        assert_eq!(out.best.value, q(1, 1));
        // (2,3) and (2,4) both give 1; the lexicographically first wins.
        assert_eq!(out.best.index_set, set(&[2, 3]));
        assert!(out.feasible.contains(&set(&[2, 4])));
        assert!(out.feasible.contains(&set(&[1, 2])));
    }

    #[test]
    fn full_system_is_exact() {
        let f = MomentMatrix::<Rational>::new(3, 0, 4).unwrap();
        let s = [q(1, 1), q(3, 2), q(3, 4), q(1, 8)];
        let v = TargetVector::new(Target::AtLeast, 3, 1, 0).unwrap();
        assert_eq!(jordan_exact(&f, &v, &s).unwrap(), q(7, 8));
        let v = TargetVector::new(Target::Exactly, 3, 2, 0).unwrap();
        assert_eq!(jordan_exact(&f, &v, &s).unwrap(), q(3, 8));
        let v = TargetVector::new(Target::AtLeast, 3, 0, 0).unwrap();
        assert_eq!(jordan_exact(&f, &v, &s).unwrap(), q(1, 1));
        let out = search_index_sets(&f, &v, &s, Side::Lower).unwrap();
        assert_eq!(out.feasible.len(), 1);
        assert!(jordan_exact(&f30(), &v, &s[..2]).is_err());
    }

    #[test]
    fn search_cap() {
        let f = MomentMatrix::<f64>::new(60, 0, 8).unwrap();
        let v = TargetVector::new(Target::AtLeast, 60, 1, 0).unwrap();
        assert!(matches!(search_index_sets(&f, &v, &[0.0; 8], Side::Upper), Err(Error::Resource(_))));
    }
}
