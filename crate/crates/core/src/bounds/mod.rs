//! Bound certificates and request dispatch.
//!
//! A bound for `P_r` or `p_r` is a sum over `j ∈ J_d` of per-tuple terms
//! `a(j)^T s(j)`. Each [`Term`] records the coefficients, the index set they
//! were solved on and, for parametric families, the chosen `m`.

pub mod l2;
pub mod l3;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combinatorics::IndexTuple;
use crate::engine::{best_feasible, feasible_coefficients, jordan_exact, FeasibleSet, Side, Target, TargetVector};
use crate::error::{arg, not_applicable, Error, Result};
use crate::moments::MomentSet;
use crate::scalar::Scalar;

pub use l2::{best_l2, lower_l1, lower_l2, upper_u1, upper_u2};
pub use l3::{
    lower_best_l3, lower_lb1, lower_lb2, lower_lb3, optimal_m, upper_best_l3, upper_ub1, upper_ub2, upper_ub3,
    CoefficientKind, CoefficientVector, MRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaId {
    U1,
    U2,
    L1,
    L2,
    Ub1,
    Ub2,
    Ub3,
    /// Per-tuple minimum over the applicable ub1/ub2/ub3 terms.
    UbBest,
    Lb1,
    Lb2,
    Lb3,
    /// Per-tuple maximum over the applicable lb1/lb2/lb3 terms.
    LbBest,
    /// Exhaustive index-set search.
    Engine,
    /// Full square system.
    Jordan,
}

impl FormulaId {
    pub const ALL: [FormulaId; 14] = [
        FormulaId::U1,
        FormulaId::U2,
        FormulaId::L1,
        FormulaId::L2,
        FormulaId::Ub1,
        FormulaId::Ub2,
        FormulaId::Ub3,
        FormulaId::UbBest,
        FormulaId::Lb1,
        FormulaId::Lb2,
        FormulaId::Lb3,
        FormulaId::LbBest,
        FormulaId::Engine,
        FormulaId::Jordan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormulaId::U1 => "u1",
            FormulaId::U2 => "u2",
            FormulaId::L1 => "l1",
            FormulaId::L2 => "l2",
            FormulaId::Ub1 => "ub1",
            FormulaId::Ub2 => "ub2",
            FormulaId::Ub3 => "ub3",
            FormulaId::UbBest => "ub-best",
            FormulaId::Lb1 => "lb1",
            FormulaId::Lb2 => "lb2",
            FormulaId::Lb3 => "lb3",
            FormulaId::LbBest => "lb-best",
            FormulaId::Engine => "engine",
            FormulaId::Jordan => "jordan",
        }
    }

    /// The side a closed-form family bounds, `None` for side-agnostic routes.
    pub fn side(self) -> Option<Side> {
        match self {
            FormulaId::U1 | FormulaId::U2 | FormulaId::Ub1 | FormulaId::Ub2 | FormulaId::Ub3 | FormulaId::UbBest => {
                Some(Side::Upper)
            }
            FormulaId::L1 | FormulaId::L2 | FormulaId::Lb1 | FormulaId::Lb2 | FormulaId::Lb3 | FormulaId::LbBest => {
                Some(Side::Lower)
            }
            FormulaId::Engine | FormulaId::Jordan => None,
        }
    }

    /// Number of moments the family consumes, `None` when it uses all of them.
    pub fn moments_used(self) -> Option<usize> {
        match self {
            FormulaId::U1 | FormulaId::U2 | FormulaId::L1 | FormulaId::L2 => Some(2),
            FormulaId::Engine | FormulaId::Jordan => None,
            _ => Some(3),
        }
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormulaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FormulaId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| arg(format!("unknown formula `{s}`")))
    }
}

/// The contribution of one `j ∈ J_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Term<T> {
    pub j: IndexTuple,
    pub family: FormulaId,
    pub coefficients: Vec<T>,
    /// Positions (1-based, within `1..=n-d+1`) the coefficients were solved on.
    pub index_set: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct BoundCertificate<T> {
    pub formula: FormulaId,
    pub side: Side,
    pub target: Target,
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub ell: usize,
    /// Raw sum of the terms.
    pub value: T,
    /// `value` clipped to `[0, 1]`.
    pub clamped: T,
    pub terms: Vec<Term<T>>,
}

impl<T: Scalar> BoundCertificate<T> {
    pub(crate) fn assemble(
        formula: FormulaId,
        side: Side,
        target: Target,
        set: &MomentSet<T>,
        r: usize,
        ell: usize,
        terms: Vec<Term<T>>,
    ) -> Self {
        let value: T = terms.iter().map(|t| t.value.clone()).sum();
        let clamped = value.clamp_unit();
        BoundCertificate { formula, side, target, n: set.n(), r, d: set.d(), ell, value, clamped, terms }
    }

    /// Whether the clamped value sits on the right side of `exact`.
    pub fn brackets(&self, exact: &T) -> bool {
        match self.side {
            Side::Upper => self.clamped.approx_ge(exact),
            Side::Lower => self.clamped.approx_le(exact),
        }
    }

    /// Distance between the clamped bound and `exact` (nonnegative when valid).
    pub fn gap(&self, exact: &T) -> T {
        match self.side {
            Side::Upper => self.clamped.clone() - exact.clone(),
            Side::Lower => exact.clone() - self.clamped.clone(),
        }
    }

    pub fn is_tighter_than(&self, other: &Self) -> bool {
        match self.side {
            Side::Upper => self.value < other.value,
            Side::Lower => self.value > other.value,
        }
    }
}

/// Common validation: `1 <= r <= n`, `d <= r`, enough moments.
pub(crate) fn check_request<T: Scalar>(set: &MomentSet<T>, r: usize, need_ell: usize) -> Result<()> {
    if r == 0 {
        return Err(not_applicable("bounds are defined for r >= 1"));
    }
    if r > set.n() {
        return Err(arg(format!("r={r} exceeds n={}", set.n())));
    }
    if set.d() > r {
        return Err(arg(format!("order d={} exceeds r={r}", set.d())));
    }
    if set.ell() < need_ell {
        return Err(not_applicable(format!("needs {need_ell} moments, only {} supplied", set.ell())));
    }
    Ok(())
}

/// `a^T s` over the first `a.len()` moments.
pub(crate) fn dot<T: Scalar>(a: &[T], s: &[T]) -> T {
    a.iter().zip(s).map(|(x, y)| x.clone() * y.clone()).sum()
}

/// One term per `j` with the same coefficient vector.
pub(crate) fn fixed_terms<T: Scalar>(
    set: &MomentSet<T>,
    family: FormulaId,
    coefficients: &[T],
    index_set: &[usize],
) -> Vec<Term<T>> {
    set.vectors()
        .iter()
        .map(|mv| Term {
            j: mv.j.clone(),
            family,
            coefficients: coefficients.to_vec(),
            index_set: index_set.to_vec(),
            m: None,
            value: dot(coefficients, &mv.values),
        })
        .collect()
}

/// Picks `m` from the bracketing rule. With `bracket = Some(t)` the candidates
/// are the integers `m` with `m - 1 <= t <= m`, clamped to `lo..=hi`;
/// otherwise the two endpoints. Candidates are evaluated and the extremal one
/// for `side` is kept (smaller `m` on ties).
pub(crate) fn select_m<T: Scalar>(
    bracket: Option<T>,
    lo: usize,
    hi: usize,
    side: Side,
    eval: impl Fn(usize) -> T,
) -> Result<(usize, T)> {
    if lo == 0 || lo > hi {
        return Err(not_applicable(format!("empty m-range {lo}..={hi}")));
    }
    let clamp = |m: i64| m.clamp(lo as i64, hi as i64) as usize;
    let mut candidates = match bracket {
        Some(t) => {
            let c = t.ceil_i64();
            let mut v = vec![clamp(c)];
            if t.is_integer() {
                v.push(clamp(c.saturating_add(1)));
                if !T::EXACT {
                    // Rounding may put an exact integer just above or below.
                    v.push(clamp(c.saturating_sub(1)));
                }
            }
            v
        }
        None => vec![lo, hi],
    };
    candidates.sort_unstable();
    candidates.dedup();
    let mut best: Option<(usize, T)> = None;
    for m in candidates {
        let value = eval(m);
        let better = match &best {
            None => true,
            Some((_, b)) => match side {
                Side::Upper => value < *b,
                Side::Lower => value > *b,
            },
        };
        if better {
            best = Some((m, value));
        }
    }
    Ok(best.expect("candidate list is never empty"))
}

/// Combines per-tuple terms of several applicable certificates by taking the
/// tightest term for every `j` (ties go to the earlier certificate).
pub(crate) fn combine_per_tuple<T: Scalar>(
    combined_id: FormulaId,
    side: Side,
    target: Target,
    set: &MomentSet<T>,
    r: usize,
    certificates: Vec<BoundCertificate<T>>,
) -> Result<BoundCertificate<T>> {
    let first = certificates
        .first()
        .ok_or_else(|| not_applicable(format!("no {combined_id} family applies for r={r}, d={}", set.d())))?;
    let ell = first.ell;
    let terms: Vec<Term<T>> = (0..first.terms.len())
        .map(|idx| {
            let mut best = certificates[0].terms[idx].clone();
            for cert in &certificates[1..] {
                let t = &cert.terms[idx];
                let better = match side {
                    Side::Upper => t.value < best.value,
                    Side::Lower => t.value > best.value,
                };
                if better {
                    best = t.clone();
                }
            }
            best
        })
        .collect();
    let formula = match terms.first().map(|t| t.family) {
        Some(f) if terms.iter().all(|t| t.family == f) => f,
        _ => combined_id,
    };
    Ok(BoundCertificate::assemble(formula, side, target, set, r, ell, terms))
}

/// Per-tuple exhaustive index-set search, summed over `J_d`.
pub fn engine_bound<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target, side: Side) -> Result<BoundCertificate<T>> {
    check_request(set, r, 1)?;
    let f = set.matrix()?;
    let v = TargetVector::new(target, set.n(), r, set.d())?;
    let feasible = feasible_coefficients(&f, &v, side)?;
    engine_bound_from(set, r, target, side, &feasible)
}

/// [`engine_bound`] over feasible sets already enumerated for this
/// `(n, d, ell, r, target, side)`.
pub fn engine_bound_from<T: Scalar>(
    set: &MomentSet<T>,
    r: usize,
    target: Target,
    side: Side,
    feasible: &[FeasibleSet<T>],
) -> Result<BoundCertificate<T>> {
    check_request(set, r, 1)?;
    let terms = set
        .vectors()
        .iter()
        .map(|mv| {
            let best = best_feasible(feasible, &mv.values, side)?;
            Ok(Term {
                j: mv.j.clone(),
                family: FormulaId::Engine,
                coefficients: best.coefficients,
                index_set: best.index_set.positions().to_vec(),
                m: None,
                value: best.value,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundCertificate::assemble(FormulaId::Engine, side, target, set, r, set.ell(), terms))
}

/// The exact value from the full moment system (`ell = n - d + 1`). Reported
/// with `side = Upper`; it is equally a lower bound.
pub fn jordan_bound<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target) -> Result<BoundCertificate<T>> {
    if r > set.n() || set.d() > r {
        return Err(arg(format!("need d <= r <= n, got d={}, r={r}, n={}", set.d(), set.n())));
    }
    let width = set.n() - set.d() + 1;
    if set.ell() != width {
        return Err(not_applicable(format!("full system needs ell={width}, got {}", set.ell())));
    }
    let f = set.matrix()?;
    let v = TargetVector::new(target, set.n(), r, set.d())?;
    let terms = set
        .vectors()
        .iter()
        .map(|mv| {
            Ok(Term {
                j: mv.j.clone(),
                family: FormulaId::Jordan,
                coefficients: Vec::new(),
                index_set: (1..=width).collect(),
                m: None,
                value: jordan_exact(&f, &v, &mv.values)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundCertificate::assemble(FormulaId::Jordan, Side::Upper, target, set, r, width, terms))
}

/// A fully specified bound query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundRequest {
    pub r: usize,
    pub ell: usize,
    pub target: Target,
    pub side: Side,
    /// `None` selects the best available family for `ell`.
    #[serde(default)]
    pub formula: Option<FormulaId>,
    /// Fixes `m` for parametric families instead of optimizing per tuple.
    #[serde(default)]
    pub m: Option<usize>,
}

impl BoundRequest {
    pub fn best(r: usize, ell: usize, target: Target, side: Side) -> Self {
        BoundRequest { r, ell, target, side, formula: None, m: None }
    }

    pub fn formula(r: usize, target: Target, side: Side, formula: FormulaId) -> Self {
        let ell = formula.moments_used().unwrap_or(2);
        BoundRequest { r, ell, target, side, formula: Some(formula), m: None }
    }
}

/// Evaluates a request against a moment set of order `d`.
pub fn evaluate<T: Scalar>(set: &MomentSet<T>, req: &BoundRequest) -> Result<BoundCertificate<T>> {
    let ell = match req.formula.and_then(FormulaId::moments_used) {
        Some(used) => used,
        None => req.ell,
    };
    if ell == 0 || ell > set.ell() {
        return Err(not_applicable(format!("request needs {ell} moments, {} supplied", set.ell())));
    }
    let set = if ell == set.ell() { set.clone() } else { set.truncate(ell)? };
    let set = &set;
    if let (Some(id), Some(formula_side)) = (req.formula, req.formula.and_then(FormulaId::side)) {
        if formula_side != req.side {
            return Err(not_applicable(format!("{id} gives {formula_side} bounds, {} requested", req.side)));
        }
    }
    let (r, target, m) = (req.r, req.target, req.m);
    let pick = |pair: (BoundCertificate<T>, BoundCertificate<T>)| match target {
        Target::AtLeast => pair.0,
        Target::Exactly => pair.1,
    };
    match req.formula {
        None => match (ell, req.side) {
            (2, side) => best_l2(set, r, target, side),
            (3, Side::Upper) => upper_best_l3(set, r, target),
            (3, Side::Lower) => lower_best_l3(set, r, target),
            (_, side) => engine_bound(set, r, target, side),
        },
        Some(FormulaId::U1) => upper_u1(set, r, target),
        Some(FormulaId::U2) => upper_u2(set, r).map(pick),
        Some(FormulaId::L1) => lower_l1(set, r, target),
        Some(FormulaId::L2) => {
            if r != set.d() {
                return Err(not_applicable("l2 bounds P_d and p_d only (r = d)"));
            }
            lower_l2(set, m).map(pick)
        }
        Some(FormulaId::Ub1) => upper_ub1(set, r, target, m),
        Some(FormulaId::Ub2) => upper_ub2(set, r).map(pick),
        Some(FormulaId::Ub3) => upper_ub3(set, r, m).map(pick),
        Some(FormulaId::UbBest) => upper_best_l3(set, r, target),
        Some(FormulaId::Lb1) => lower_lb1(set, r, target),
        Some(FormulaId::Lb2) => lower_lb2(set, r, m).map(pick),
        Some(FormulaId::Lb3) => lower_lb3(set, r, m).map(pick),
        Some(FormulaId::LbBest) => lower_best_l3(set, r, target),
        Some(FormulaId::Engine) => engine_bound(set, r, target, req.side),
        Some(FormulaId::Jordan) => jordan_bound(set, r, target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn formula_names_round_trip() {
        for id in FormulaId::ALL {
            assert_eq!(id.name().parse::<FormulaId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.name()));
        }
        assert!("u9".parse::<FormulaId>().is_err());
    }

    #[test]
    fn m_selection() {
        let eval = |m: usize| Rational::new((m as i64 - 3).pow(2), 1);
        // Bracket 2.5 -> m = 3.
        assert_eq!(select_m(Some(Rational::new(5, 2)), 1, 6, Side::Upper, eval).unwrap().0, 3);
        // Integer bracket 2 -> {2, 3}, upper keeps the smaller value.
        assert_eq!(select_m(Some(Rational::new(2, 1)), 1, 6, Side::Upper, eval).unwrap().0, 3);
        // Out of range brackets are clamped.
        assert_eq!(select_m(Some(Rational::new(40, 1)), 1, 6, Side::Lower, eval).unwrap().0, 6);
        // No bracket: endpoints only.
        assert_eq!(select_m(None, 2, 5, Side::Lower, eval).unwrap().0, 5);
        assert!(select_m(None, 3, 2, Side::Lower, eval).unwrap_err().is_not_applicable());
    }
}
