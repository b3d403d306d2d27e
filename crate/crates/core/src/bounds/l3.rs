//! Closed-form bounds from three moments per tuple.

use serde::{Deserialize, Serialize};

use super::{check_request, combine_per_tuple, dot, fixed_terms, select_m, BoundCertificate, FormulaId, Term};
use crate::combinatorics::binomial;
use crate::engine::{Side, Target};
use crate::error::{arg, not_applicable, Error, Result};
use crate::moments::{MomentSet, MomentVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientKind {
    /// Two-moment lower family for `P_d`.
    LowerPair,
    UpperAlpha,
    UpperBeta,
    UpperDelta,
    UpperGamma,
    LowerAlpha,
    LowerDelta,
    LowerBeta,
    LowerTheta,
    LowerGamma,
    LowerPhi,
}

/// Coefficients applied to `(s_1, s_2[, s_3])`, with the index set they solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct CoefficientVector<T> {
    pub kind: CoefficientKind,
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub m: Option<usize>,
    pub index_set: Vec<usize>,
    pub values: Vec<T>,
}

fn c<T: Scalar>(u: usize, v: usize) -> T {
    binomial(u as u64, v as u64)
}

fn int<T: Scalar>(v: i64) -> T {
    T::from_i64(v)
}

fn nonzero<T: Scalar>(den: &T, what: &str) -> Result<()> {
    if den.is_zero_tol() {
        Err(Error::DegenerateConfiguration(format!("{what} vanishes")))
    } else {
        Ok(())
    }
}

impl<T: Scalar> CoefficientVector<T> {
    fn build(kind: CoefficientKind, n: usize, r: usize, d: usize, m: Option<usize>, index_set: Vec<usize>, values: Vec<T>) -> Self {
        CoefficientVector { kind, n, r, d, m, index_set, values }
    }

    /// `(d+1)/((m+d) C(m+d-1, d)) * (m, -d)` on positions `(m, m+1)`.
    pub fn lower_pair(n: usize, d: usize, m: usize) -> Result<Self> {
        if m == 0 || m + d > n {
            return Err(arg(format!("m={m} outside 1..={}", n.saturating_sub(d))));
        }
        let scale = int::<T>(d as i64 + 1) / (int::<T>((m + d) as i64) * c(m + d - 1, d));
        let values = vec![scale.clone() * int(m as i64), scale * int(-(d as i64))];
        Ok(Self::build(CoefficientKind::LowerPair, n, d, d, Some(m), vec![m, m + 1], values))
    }

    /// Upper `α`. Positions `(m, m+1, r-d+1)` when `m < r-d`, otherwise
    /// `(r-d+1, m, m+1)`.
    pub fn upper_alpha(n: usize, r: usize, d: usize, m: usize) -> Result<Self> {
        let (rd, mi) = ((r - d) as i64, m as i64);
        let delta = (rd - mi) * (rd - mi + 1);
        if delta == 0 {
            return Err(Error::DegenerateConfiguration(format!("alpha denominator vanishes at m={m}")));
        }
        let scale = T::one() / (int::<T>(delta) * c(r, d));
        let d1 = d as i64 + 1;
        let values = vec![
            scale.clone() * int(mi * (mi - 1)),
            scale.clone() * int(-2 * d1 * (mi - 1)),
            scale * int(d1 * (d1 + 1)),
        ];
        let index_set = if m < r - d { vec![m, m + 1, r - d + 1] } else { vec![r - d + 1, m, m + 1] };
        Ok(Self::build(CoefficientKind::UpperAlpha, n, r, d, Some(m), index_set, values))
    }

    fn upper_delta1(n: usize, r: usize, d: usize) -> Result<T> {
        let den = c::<T>(n, d + 2) * c(r, d + 1) - c::<T>(n, d + 1) * c(r, d + 2);
        nonzero(&den, "Δ1")?;
        Ok(den)
    }

    /// Upper `β` for `P_r` on `(1, r-d+1, n-d+1)`.
    pub fn upper_beta(n: usize, r: usize, d: usize) -> Result<Self> {
        let den = Self::upper_delta1(n, r, d)?;
        let values = vec![
            T::zero(),
            (c::<T>(n, d + 2) - c(r, d + 2)) / den.clone(),
            (c::<T>(r, d + 1) - c(n, d + 1)) / den,
        ];
        Ok(Self::build(CoefficientKind::UpperBeta, n, r, d, None, vec![1, r - d + 1, n - d + 1], values))
    }

    /// Upper `δ` for `p_r` on `(1, r-d+1, n-d+1)`.
    pub fn upper_delta(n: usize, r: usize, d: usize) -> Result<Self> {
        let den = Self::upper_delta1(n, r, d)?;
        let values = vec![T::zero(), c::<T>(n, d + 2) / den.clone(), -(c::<T>(n, d + 1) / den)];
        Ok(Self::build(CoefficientKind::UpperDelta, n, r, d, None, vec![1, r - d + 1, n - d + 1], values))
    }

    /// Shared shape of the two `γ` families. With `top = r` it is the upper
    /// `γ` on `(r-d+1, m, m+1)`; with `top = n` the lower `γ` on `(m, m+1, n-d+1)`.
    fn gamma(top: usize, d: usize, m: usize) -> Result<Vec<T>> {
        let (td, mi, d1) = ((top - d) as i64, m as i64, d as i64 + 1);
        let delta = (td - mi) * (td - mi + 1);
        if delta == 0 {
            return Err(Error::DegenerateConfiguration(format!("gamma denominator vanishes at m={m}")));
        }
        let a = c::<T>(m + d - 1, d) * int(delta);
        let b = c::<T>(m + d, d) * int(delta);
        let rr = c::<T>(top, d) * int(delta);
        let g1 = int::<T>(mi * td * (td - mi)) / a.clone() - int::<T>((mi - 1) * td * (td - mi + 1)) / b.clone()
            + int::<T>(mi * (mi - 1)) / rr.clone();
        let g2 = int::<T>(d1)
            * (int::<T>(-(td - mi) * (td + mi - 1)) / a.clone() + int::<T>((td - mi + 1) * (td + mi - 2)) / b.clone()
                - int::<T>(2 * (mi - 1)) / rr.clone());
        let g3 = int::<T>(d1 * (d1 + 1)) * (int::<T>(td - mi) / a - int::<T>(td - mi + 1) / b + T::one() / rr);
        Ok(vec![g1, g2, g3])
    }

    /// Upper `γ` for `P_r` on `(r-d+1, m, m+1)`.
    pub fn upper_gamma(n: usize, r: usize, d: usize, m: usize) -> Result<Self> {
        let values = Self::gamma(r, d, m)?;
        Ok(Self::build(CoefficientKind::UpperGamma, n, r, d, Some(m), vec![r - d + 1, m, m + 1], values))
    }

    /// Lower `α` for `P_r` on `(1, r-d, n-d+1)`.
    pub fn lower_alpha(n: usize, r: usize, d: usize) -> Result<Self> {
        let den = c::<T>(n, d + 2) * c(r - 1, d + 1) - c::<T>(n, d + 1) * c(r - 1, d + 2);
        nonzero(&den, "Δ2")?;
        let values = vec![T::zero(), -(c::<T>(r - 1, d + 2) / den.clone()), c::<T>(r - 1, d + 1) / den];
        Ok(Self::build(CoefficientKind::LowerAlpha, n, r, d, None, vec![1, r - d, n - d + 1], values))
    }

    /// Lower `δ` for `p_n`: lower `α` at `r = n`.
    pub fn lower_delta(n: usize, d: usize) -> Result<Self> {
        let mut v = Self::lower_alpha(n, n, d)?;
        v.kind = CoefficientKind::LowerDelta;
        Ok(v)
    }

    /// Lower `β` for `P_r` on `(r-d, m, m+1)`.
    pub fn lower_beta(n: usize, r: usize, d: usize, m: usize) -> Result<Self> {
        let (rd, mi, d1) = ((r - d) as i64, m as i64, d as i64 + 1);
        let delta = (rd - mi - 1) * (rd - mi);
        if delta == 0 {
            return Err(Error::DegenerateConfiguration(format!("beta denominator vanishes at m={m}")));
        }
        let a = c::<T>(m + d - 1, d) * int(delta);
        let b = c::<T>(m + d, d) * int(delta);
        let b1 = int::<T>(mi * (rd - 1) * (rd - mi - 1)) / a.clone() - int::<T>((mi - 1) * (rd - 1) * (rd - mi)) / b.clone();
        let b2 = int::<T>(d1)
            * (int::<T>((rd - mi) * (rd + mi - 3)) / b.clone() - int::<T>((rd - mi - 1) * (rd + mi - 2)) / a.clone());
        let b3 = int::<T>(d1 * (d1 + 1)) * (int::<T>(rd - mi - 1) / a - int::<T>(rd - mi) / b);
        Ok(Self::build(CoefficientKind::LowerBeta, n, r, d, Some(m), vec![r - d, m, m + 1], vec![b1, b2, b3]))
    }

    /// Lower `θ` for `p_r` on `(r-d, r-d+1, r-d+2)`.
    pub fn lower_theta(n: usize, r: usize, d: usize) -> Result<Self> {
        let (rd, d1) = ((r - d) as i64, d as i64 + 1);
        let scale = T::one() / c::<T>(r, d);
        let values = vec![
            scale.clone() * int(-(rd + 1) * (rd - 1)),
            scale.clone() * int(d1 * (2 * rd - 1)),
            scale * int(-d1 * (d1 + 1)),
        ];
        Ok(Self::build(CoefficientKind::LowerTheta, n, r, d, None, vec![r - d, r - d + 1, r - d + 2], values))
    }

    /// Lower `γ` for `P_d` on `(m, m+1, n-d+1)`.
    pub fn lower_gamma(n: usize, d: usize, m: usize) -> Result<Self> {
        let values = Self::gamma(n, d, m)?;
        Ok(Self::build(CoefficientKind::LowerGamma, n, d, d, Some(m), vec![m, m + 1, n - d + 1], values))
    }

    /// Lower `φ` for `p_d` on `(1, 2, n-d+1)`.
    pub fn lower_phi(n: usize, d: usize) -> Result<Self> {
        if n <= d {
            return Err(Error::DegenerateConfiguration("phi needs n > d".into()));
        }
        let d1 = d as i64 + 1;
        let values = vec![T::one(), int(-d1), int::<T>(d1 * (d1 + 1)) / int((n - d) as i64)];
        Ok(Self::build(CoefficientKind::LowerPhi, n, d, d, None, vec![1, 2, n - d + 1], values))
    }
}

/// The optimal-`m` rules of the parametric families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MRule {
    /// Two-moment lower bound for `P_d`.
    L2,
    /// Upper `α` with `m < r-d`.
    Ub1,
    /// Upper `γ`/`α` with `m > r-d+1`.
    Ub3,
    /// Lower `β`.
    Lb2,
    /// Lower `γ` for `P_d`.
    Lb3,
}

impl MRule {
    pub fn side(self) -> Side {
        match self {
            MRule::Ub1 | MRule::Ub3 => Side::Upper,
            MRule::L2 | MRule::Lb2 | MRule::Lb3 => Side::Lower,
        }
    }

    /// Admissible `m` for the rule, possibly empty.
    pub fn range(self, n: usize, r: usize, d: usize) -> (usize, usize) {
        let (n, r, d) = (n as i64, r as i64, d as i64);
        let (lo, hi) = match self {
            MRule::L2 => (1, n - d),
            MRule::Ub1 => (1, r - d - 1),
            MRule::Ub3 => (r - d + 2, n - d),
            MRule::Lb2 => (r - d + 1, n - d),
            MRule::Lb3 => (1, n - d - 1),
        };
        if hi < lo || hi < 1 {
            (1, 0)
        } else {
            (lo as usize, hi as usize)
        }
    }

    /// Coefficients of the rule's family at `m`.
    pub fn coefficients<T: Scalar>(self, target: Target, n: usize, r: usize, d: usize, m: usize) -> Result<CoefficientVector<T>> {
        match (self, target) {
            (MRule::L2, Target::AtLeast) => CoefficientVector::lower_pair(n, d, m),
            (MRule::Ub1, _) | (MRule::Ub3, Target::Exactly) => CoefficientVector::upper_alpha(n, r, d, m),
            (MRule::Ub3, Target::AtLeast) => CoefficientVector::upper_gamma(n, r, d, m),
            (MRule::Lb2, Target::AtLeast) => CoefficientVector::lower_beta(n, r, d, m),
            (MRule::Lb3, Target::AtLeast) => CoefficientVector::lower_gamma(n, d, m),
            (rule, Target::Exactly) => Err(not_applicable(format!("{rule:?} has no parametric exactly-r family"))),
        }
    }

    /// The real `t` with the optimum bracketed by `m - 1 <= t <= m`, or
    /// `None` when the rule's sign condition fails.
    pub fn bracket<T: Scalar>(self, s: &MomentVector<T>, n: usize, r: usize) -> Option<T> {
        let d = s.d() as i64;
        let (n, r) = (n as i64, r as i64);
        let d1 = int::<T>(d + 1);
        let s1 = s.s(1).clone();
        let s2 = s.s(2).clone();
        let s3 = || s.s(3).clone();
        let (num, den, positive) = match self {
            MRule::L2 => (d1 * s2, s1, true),
            MRule::Ub1 | MRule::Ub3 => {
                let den = int::<T>(r - d) * s1 - d1.clone() * s2.clone();
                let num = d1 * (int::<T>(r - d - 1) * s2 - int::<T>(d + 2) * s3());
                (num, den, self == MRule::Ub1)
            }
            MRule::Lb2 => {
                let den = d1.clone() * s2.clone() - int::<T>(r - d - 1) * s1;
                let num = d1 * (int::<T>(d + 2) * s3() - int::<T>(r - d - 2) * s2);
                (num, den, true)
            }
            MRule::Lb3 => {
                let den = int::<T>(n - d) * s1 - d1.clone() * s2.clone();
                let num = d1 * (int::<T>(n - d - 1) * s2 - int::<T>(d + 2) * s3());
                (num, den, true)
            }
        };
        let ok = if positive { den.is_positive() } else { den.is_negative() };
        ok.then(|| num / den)
    }
}

/// Optimal `m` for one tuple: the bracket candidates (or the range endpoints
/// when the sign condition fails), evaluated and reduced to the extremum.
pub fn optimal_m<T: Scalar>(rule: MRule, target: Target, s: &MomentVector<T>, n: usize, r: usize) -> Result<usize> {
    let d = s.d();
    let (lo, hi) = rule.range(n, r, d);
    if lo > hi {
        return Err(not_applicable(format!("{rule:?}: empty m-range")));
    }
    let cache = (lo..=hi).map(|m| rule.coefficients::<T>(target, n, r, d, m)).collect::<Result<Vec<_>>>()?;
    let (m, _) = select_m(rule.bracket(s, n, r), lo, hi, rule.side(), |m| dot(&cache[m - lo].values, &s.values))?;
    Ok(m)
}

/// Per-tuple terms of a parametric family, with `m` either fixed or chosen
/// per tuple by `rule`.
pub(crate) fn parametric_terms<T: Scalar>(
    set: &MomentSet<T>,
    family: FormulaId,
    rule: MRule,
    target: Target,
    r: usize,
    fixed_m: Option<usize>,
) -> Result<Vec<Term<T>>> {
    let (n, d) = (set.n(), set.d());
    let (lo, hi) = rule.range(n, r, d);
    if lo > hi {
        return Err(not_applicable(format!("{family}: empty m-range for n={n}, r={r}, d={d}")));
    }
    if let Some(m) = fixed_m {
        if !(lo..=hi).contains(&m) {
            return Err(arg(format!("{family}: m={m} outside {lo}..={hi}")));
        }
    }
    let (clo, chi) = fixed_m.map_or((lo, hi), |m| (m, m));
    let cache = (clo..=chi).map(|m| rule.coefficients::<T>(target, n, r, d, m)).collect::<Result<Vec<_>>>()?;
    set.vectors()
        .iter()
        .map(|mv| {
            let m = match fixed_m {
                Some(m) => m,
                None => select_m(rule.bracket(mv, n, r), lo, hi, rule.side(), |m| dot(&cache[m - clo].values, &mv.values))?.0,
            };
            let cv = &cache[m - clo];
            Ok(Term {
                j: mv.j.clone(),
                family,
                coefficients: cv.values.clone(),
                index_set: cv.index_set.clone(),
                m: Some(m),
                value: dot(&cv.values, &mv.values),
            })
        })
        .collect()
}

fn fixed<T: Scalar>(set: &MomentSet<T>, family: FormulaId, cv: &CoefficientVector<T>) -> Vec<Term<T>> {
    fixed_terms(set, family, &cv.values, &cv.index_set)
}

/// Upper bound from `α` with `m < r-d`; serves both targets. Needs `r - d >= 2`.
pub fn upper_ub1<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target, m: Option<usize>) -> Result<BoundCertificate<T>> {
    check_request(set, r, 3)?;
    if r < set.d() + 2 {
        return Err(not_applicable("ub1 needs r - d >= 2"));
    }
    let terms = parametric_terms(set, FormulaId::Ub1, MRule::Ub1, target, r, m)?;
    Ok(BoundCertificate::assemble(FormulaId::Ub1, Side::Upper, target, set, r, 3, terms))
}

/// Upper bounds `(P_r via β, p_r via δ)`. Needs `r - d >= 1` and `n - r >= 1`.
pub fn upper_ub2<T: Scalar>(set: &MomentSet<T>, r: usize) -> Result<(BoundCertificate<T>, BoundCertificate<T>)> {
    check_request(set, r, 3)?;
    let (n, d) = (set.n(), set.d());
    if r <= d || r >= n {
        return Err(not_applicable("ub2 needs r - d >= 1 and n - r >= 1"));
    }
    let beta = CoefficientVector::upper_beta(n, r, d)?;
    let delta = CoefficientVector::upper_delta(n, r, d)?;
    Ok((
        BoundCertificate::assemble(FormulaId::Ub2, Side::Upper, Target::AtLeast, set, r, 3, fixed(set, FormulaId::Ub2, &beta)),
        BoundCertificate::assemble(FormulaId::Ub2, Side::Upper, Target::Exactly, set, r, 3, fixed(set, FormulaId::Ub2, &delta)),
    ))
}

/// Upper bounds `(P_r via γ, p_r via α)` with `m > r-d+1`. Needs `n - r >= 2`.
pub fn upper_ub3<T: Scalar>(
    set: &MomentSet<T>,
    r: usize,
    m: Option<usize>,
) -> Result<(BoundCertificate<T>, BoundCertificate<T>)> {
    check_request(set, r, 3)?;
    if r + 2 > set.n() {
        return Err(not_applicable("ub3 needs n - r >= 2"));
    }
    let at_least = parametric_terms(set, FormulaId::Ub3, MRule::Ub3, Target::AtLeast, r, m)?;
    let exactly = parametric_terms(set, FormulaId::Ub3, MRule::Ub3, Target::Exactly, r, m)?;
    Ok((
        BoundCertificate::assemble(FormulaId::Ub3, Side::Upper, Target::AtLeast, set, r, 3, at_least),
        BoundCertificate::assemble(FormulaId::Ub3, Side::Upper, Target::Exactly, set, r, 3, exactly),
    ))
}

fn pick<T>(pair: (BoundCertificate<T>, BoundCertificate<T>), target: Target) -> BoundCertificate<T> {
    match target {
        Target::AtLeast => pair.0,
        Target::Exactly => pair.1,
    }
}

/// Keeps successes, drops not-applicable families, propagates anything else.
fn applicable<T>(results: Vec<Result<BoundCertificate<T>>>) -> Result<Vec<BoundCertificate<T>>> {
    let mut out = Vec::new();
    for r in results {
        match r {
            Ok(c) => out.push(c),
            Err(e) if e.is_not_applicable() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Per-tuple minimum over the applicable upper families.
pub fn upper_best_l3<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target) -> Result<BoundCertificate<T>> {
    check_request(set, r, 3)?;
    let certs = applicable(vec![
        upper_ub1(set, r, target, None),
        upper_ub2(set, r).map(|p| pick(p, target)),
        upper_ub3(set, r, None).map(|p| pick(p, target)),
    ])?;
    combine_per_tuple(FormulaId::UbBest, Side::Upper, target, set, r, certs)
}

/// Lower bound from `α` (or `δ` at `r = n` for `p_n`). Needs `r - d >= 2`.
pub fn lower_lb1<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target) -> Result<BoundCertificate<T>> {
    check_request(set, r, 3)?;
    let (n, d) = (set.n(), set.d());
    if r < d + 2 {
        return Err(not_applicable("lb1 needs r - d >= 2"));
    }
    let cv = match target {
        Target::AtLeast => CoefficientVector::lower_alpha(n, r, d)?,
        Target::Exactly if r == n => CoefficientVector::lower_delta(n, d)?,
        Target::Exactly => return Err(not_applicable("lb1 bounds p_r only for r = n")),
    };
    Ok(BoundCertificate::assemble(FormulaId::Lb1, Side::Lower, target, set, r, 3, fixed(set, FormulaId::Lb1, &cv)))
}

/// Lower bounds `(P_r via β, p_r via θ)`. Needs `r - d >= 1` and `n - r >= 1`.
pub fn lower_lb2<T: Scalar>(
    set: &MomentSet<T>,
    r: usize,
    m: Option<usize>,
) -> Result<(BoundCertificate<T>, BoundCertificate<T>)> {
    check_request(set, r, 3)?;
    let (n, d) = (set.n(), set.d());
    if r <= d || r >= n {
        return Err(not_applicable("lb2 needs r - d >= 1 and n - r >= 1"));
    }
    let beta = parametric_terms(set, FormulaId::Lb2, MRule::Lb2, Target::AtLeast, r, m)?;
    let theta = CoefficientVector::lower_theta(n, r, d)?;
    Ok((
        BoundCertificate::assemble(FormulaId::Lb2, Side::Lower, Target::AtLeast, set, r, 3, beta),
        BoundCertificate::assemble(FormulaId::Lb2, Side::Lower, Target::Exactly, set, r, 3, fixed(set, FormulaId::Lb2, &theta)),
    ))
}

/// Lower bounds `(P_d via γ, p_d via φ)`. Needs `r = d` and `n - d >= 2`.
pub fn lower_lb3<T: Scalar>(
    set: &MomentSet<T>,
    r: usize,
    m: Option<usize>,
) -> Result<(BoundCertificate<T>, BoundCertificate<T>)> {
    check_request(set, r, 3)?;
    let (n, d) = (set.n(), set.d());
    if r != d {
        return Err(not_applicable("lb3 needs r = d"));
    }
    if n < d + 2 {
        return Err(not_applicable("lb3 needs n - d >= 2"));
    }
    let gamma = parametric_terms(set, FormulaId::Lb3, MRule::Lb3, Target::AtLeast, r, m)?;
    let phi = CoefficientVector::lower_phi(n, d)?;
    Ok((
        BoundCertificate::assemble(FormulaId::Lb3, Side::Lower, Target::AtLeast, set, r, 3, gamma),
        BoundCertificate::assemble(FormulaId::Lb3, Side::Lower, Target::Exactly, set, r, 3, fixed(set, FormulaId::Lb3, &phi)),
    ))
}

/// Per-tuple maximum over the applicable lower families.
pub fn lower_best_l3<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target) -> Result<BoundCertificate<T>> {
    check_request(set, r, 3)?;
    let certs = applicable(vec![
        lower_lb1(set, r, target),
        lower_lb2(set, r, None).map(|p| pick(p, target)),
        lower_lb3(set, r, None).map(|p| pick(p, target)),
    ])?;
    combine_per_tuple(FormulaId::LbBest, Side::Lower, target, set, r, certs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{solve_coefficients, IndexSet, TargetVector};
    use crate::moments::MomentMatrix;
    use crate::scalar::Rational;
    use crate::system::EventSystem;

    type Q = Rational;

    fn q(a: i64, b: i64) -> Q {
        Rational::new(a, b)
    }

    fn fair(n: usize) -> EventSystem<Q> {
        EventSystem::independent(&vec![q(1, 2); n]).unwrap()
    }

    fn moments(n: usize, d: usize) -> MomentSet<Q> {
        MomentSet::from_system(&fair(n), d, 3).unwrap()
    }

    fn solved(n: usize, r: usize, d: usize, target: Target, cv: &CoefficientVector<Q>) -> Vec<Q> {
        let f = MomentMatrix::new(n, d, 3).unwrap();
        let v = TargetVector::new(target, n, r, d).unwrap();
        let i = IndexSet::new(cv.index_set.clone(), n - d + 1).unwrap();
        solve_coefficients(&f, &i, &v).unwrap()
    }

    #[test]
    fn alpha_small_case() {
        let a = CoefficientVector::<Q>::upper_alpha(3, 2, 0, 1).unwrap();
        assert_eq!(a.values, vec![q(0, 1), q(0, 1), q(1, 1)]);
        assert_eq!(a.index_set, vec![1, 2, 3]);
    }

    #[test]
    fn coefficients_match_engine() {
        for n in 2..=7usize {
            for d in 0..n - 1 {
                for r in d.max(1)..=n {
                    let mut checks: Vec<(Target, CoefficientVector<Q>)> = Vec::new();
                    if r >= d + 2 {
                        for m in 1..r - d {
                            checks.push((Target::AtLeast, CoefficientVector::upper_alpha(n, r, d, m).unwrap()));
                        }
                        checks.push((Target::AtLeast, CoefficientVector::lower_alpha(n, r, d).unwrap()));
                    }
                    if r > d && r < n {
                        checks.push((Target::AtLeast, CoefficientVector::upper_beta(n, r, d).unwrap()));
                        checks.push((Target::Exactly, CoefficientVector::upper_delta(n, r, d).unwrap()));
                        checks.push((Target::Exactly, CoefficientVector::lower_theta(n, r, d).unwrap()));
                        for m in r - d + 1..=n - d {
                            checks.push((Target::AtLeast, CoefficientVector::lower_beta(n, r, d, m).unwrap()));
                        }
                    }
                    if r + 2 <= n {
                        for m in r - d + 2..=n - d {
                            checks.push((Target::AtLeast, CoefficientVector::upper_gamma(n, r, d, m).unwrap()));
                            checks.push((Target::Exactly, CoefficientVector::upper_alpha(n, r, d, m).unwrap()));
                        }
                    }
                    if r == d && n >= d + 2 {
                        for m in 1..n - d {
                            checks.push((Target::AtLeast, CoefficientVector::lower_gamma(n, d, m).unwrap()));
                        }
                        checks.push((Target::Exactly, CoefficientVector::lower_phi(n, d).unwrap()));
                    }
                    for (target, cv) in checks {
                        assert_eq!(cv.values, solved(n, r, d, target, &cv), "{cv:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_reduces_at_order_zero() {
        for n in 3..=7 {
            for m in 1..n - 1 {
                let g = CoefficientVector::<Q>::lower_gamma(n, 0, m).unwrap();
                assert_eq!(g.values, vec![q(1, 1), q(0, 1), q(0, 1)]);
            }
            for r in 1..n - 1 {
                for m in r + 2..=n {
                    let g = CoefficientVector::<Q>::upper_gamma(n, r, 0, m).unwrap();
                    assert_eq!(g.values, vec![q(1, 1), q(0, 1), q(0, 1)]);
                }
            }
        }
    }

    #[test]
    fn sign_patterns() {
        let zero = q(0, 1);
        for n in 3..=8usize {
            for d in 1..n - 1 {
                for m in 1..n - d {
                    let g = CoefficientVector::<Q>::lower_gamma(n, d, m).unwrap().values;
                    assert!(g[0] > zero && g[1] < zero && g[2] > zero, "lower gamma n={n} d={d} m={m}");
                }
                for r in d..n - 1 {
                    for m in r - d + 2..=n - d {
                        let g = CoefficientVector::<Q>::upper_gamma(n, r, d, m).unwrap().values;
                        assert!(g[0] > zero && g[1] < zero && g[2] > zero, "upper gamma n={n} r={r} d={d} m={m}");
                    }
                }
            }
            for d in 0..n {
                for r in d + 2..n {
                    for m in r - d + 1..=n - d {
                        let b = CoefficientVector::<Q>::lower_beta(n, r, d, m).unwrap().values;
                        assert!(b[0] < zero && b[1] > zero && b[2] < zero, "beta n={n} r={r} d={d} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn fair_three_event_values() {
        let s1 = moments(3, 1);
        let (p, e) = upper_ub2(&s1, 2).unwrap();
        assert_eq!(p.value, q(1, 2));
        assert_eq!(e.value, q(3, 8));
        let (p, e) = lower_lb2(&s1, 2, Some(2)).unwrap();
        assert_eq!(p.value, q(1, 2));
        assert_eq!(e.value, q(3, 8));
        let (_, e) = lower_lb3(&s1, 1, None).unwrap();
        assert_eq!(e.terms[0].coefficients, vec![q(1, 1), q(-2, 1), q(3, 1)]);
        assert_eq!(e.value, q(3, 8));
        assert_eq!(upper_best_l3(&s1, 2, Target::AtLeast).unwrap().value, q(1, 2));
        assert_eq!(lower_best_l3(&s1, 2, Target::AtLeast).unwrap().value, q(1, 2));

        let s0 = moments(3, 0);
        assert_eq!(upper_ub1(&s0, 2, Target::AtLeast, Some(1)).unwrap().value, q(3, 4));
        assert_eq!(lower_lb1(&s0, 2, Target::AtLeast).unwrap().value, q(1, 4));
        assert_eq!(optimal_m(MRule::Ub1, Target::AtLeast, &s0.vectors()[0], 3, 2).unwrap(), 1);
        assert_eq!(MRule::Ub1.bracket(&s0.vectors()[0], 3, 2), Some(q(0, 1)));
    }

    #[test]
    fn applicability() {
        let s1 = moments(3, 1);
        assert!(upper_ub1(&s1, 2, Target::AtLeast, None).unwrap_err().is_not_applicable());
        assert!(upper_ub2(&s1, 3).unwrap_err().is_not_applicable());
        assert!(lower_lb1(&s1, 3, Target::Exactly).is_ok());
        assert!(lower_lb3(&s1, 2, None).unwrap_err().is_not_applicable());
        assert!(matches!(lower_lb2(&s1, 2, Some(1)), Err(Error::Argument(_))));
        let s0 = moments(4, 0);
        assert!(lower_lb1(&s0, 3, Target::Exactly).unwrap_err().is_not_applicable());
    }

    #[test]
    fn optimal_m_matches_sweep() {
        let sys = EventSystem::<Q>::normalize(
            4,
            [(0b0011, q(3, 1)), (0b0111, q(1, 1)), (0b1000, q(2, 1)), (0b1111, q(1, 1)), (0, q(1, 1))],
        )
        .unwrap();
        let n = 4;
        for d in 0..=2 {
            let set = MomentSet::from_system(&sys, d, 3).unwrap();
            for r in d.max(1)..=n {
                for rule in [MRule::Ub1, MRule::Ub3, MRule::Lb2, MRule::Lb3] {
                    let (lo, hi) = rule.range(n, r, d);
                    if lo > hi || (rule == MRule::Lb3 && r != d) || (rule == MRule::Lb2 && r == n) {
                        continue;
                    }
                    for s in set.vectors() {
                        let m = optimal_m(rule, Target::AtLeast, s, n, r).unwrap();
                        let eval = |m| dot(&rule.coefficients::<Q>(Target::AtLeast, n, r, d, m).unwrap().values, &s.values);
                        let sweep: Vec<Q> = (lo..=hi).map(eval).collect();
                        let best = match rule.side() {
                            Side::Upper => sweep.iter().min(),
                            Side::Lower => sweep.iter().max(),
                        };
                        assert_eq!(&eval(m), best.unwrap(), "{rule:?} r={r} d={d}");
                    }
                }
            }
        }
    }
}
