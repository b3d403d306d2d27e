//! Closed-form bounds from two moments per tuple.

use super::l3::{parametric_terms, MRule};
use super::{check_request, fixed_terms, BoundCertificate, FormulaId};
use crate::combinatorics::binomial;
use crate::engine::{Side, Target};
use crate::error::{not_applicable, Error, Result};
use crate::moments::MomentSet;
use crate::scalar::Scalar;

fn c<T: Scalar>(u: usize, v: usize) -> T {
    binomial(u as u64, v as u64)
}

/// `Σ_j s_2(j) / C(r, d+1)`; serves both targets. Needs `r > d`.
pub fn upper_u1<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target) -> Result<BoundCertificate<T>> {
    check_request(set, r, 2)?;
    let d = set.d();
    if r <= d {
        return Err(not_applicable("u1 needs r - d >= 1"));
    }
    let a = [T::zero(), T::one() / c::<T>(r, d + 1)];
    let terms = fixed_terms(set, FormulaId::U1, &a, &[1, r - d + 1]);
    Ok(BoundCertificate::assemble(FormulaId::U1, Side::Upper, target, set, r, 2, terms))
}

/// Upper bounds `(P_r, p_r)` on positions `(r-d+1, n-d+1)`. Needs `r < n`.
pub fn upper_u2<T: Scalar>(set: &MomentSet<T>, r: usize) -> Result<(BoundCertificate<T>, BoundCertificate<T>)> {
    check_request(set, r, 2)?;
    let (n, d) = (set.n(), set.d());
    if r >= n {
        return Err(not_applicable("u2 needs n - r >= 1"));
    }
    let den = c::<T>(n, d + 1) * c(r, d) - c::<T>(n, d) * c(r, d + 1);
    if den.is_zero_tol() {
        return Err(Error::DegenerateConfiguration("u2 denominator vanishes".into()));
    }
    let at_least = [
        (c::<T>(n, d + 1) - c(r, d + 1)) / den.clone(),
        (c::<T>(r, d) - c(n, d)) / den.clone(),
    ];
    let exactly = [c::<T>(n, d + 1) / den.clone(), -(c::<T>(n, d) / den)];
    let positions = [r - d + 1, n - d + 1];
    Ok((
        BoundCertificate::assemble(
            FormulaId::U2,
            Side::Upper,
            Target::AtLeast,
            set,
            r,
            2,
            fixed_terms(set, FormulaId::U2, &at_least, &positions),
        ),
        BoundCertificate::assemble(
            FormulaId::U2,
            Side::Upper,
            Target::Exactly,
            set,
            r,
            2,
            fixed_terms(set, FormulaId::U2, &exactly, &positions),
        ),
    ))
}

/// Lower bound on positions `(r-d, n-d+1)`. Needs `r > d`; the exactly-r
/// target exists only at `r = n`.
pub fn lower_l1<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target) -> Result<BoundCertificate<T>> {
    check_request(set, r, 2)?;
    let (n, d) = (set.n(), set.d());
    if r <= d {
        return Err(not_applicable("l1 needs r - d >= 1"));
    }
    if target == Target::Exactly && r != n {
        return Err(not_applicable("l1 bounds p_r only for r = n"));
    }
    let den = c::<T>(n, d + 1) * c(r - 1, d) - c::<T>(n, d) * c(r - 1, d + 1);
    if den.is_zero_tol() {
        return Err(Error::DegenerateConfiguration("l1 denominator vanishes".into()));
    }
    let a = [-(c::<T>(r - 1, d + 1) / den.clone()), c::<T>(r - 1, d) / den];
    let terms = fixed_terms(set, FormulaId::L1, &a, &[r - d, n - d + 1]);
    Ok(BoundCertificate::assemble(FormulaId::L1, Side::Lower, target, set, r, 2, terms))
}

/// Lower bounds `(P_d, p_d)` for `r = d >= 1`. The `P_d` bound uses positions
/// `(m, m+1)` with `m` fixed or chosen per tuple; the `p_d` bound uses `(1, 2)`.
pub fn lower_l2<T: Scalar>(set: &MomentSet<T>, m: Option<usize>) -> Result<(BoundCertificate<T>, BoundCertificate<T>)> {
    let (n, d) = (set.n(), set.d());
    check_request(set, d, 2)?;
    if n <= d {
        return Err(not_applicable("l2 needs n - d >= 1"));
    }
    let at_least = parametric_terms(set, FormulaId::L2, MRule::L2, Target::AtLeast, d, m)?;
    let a = [T::one(), -T::from_i64(d as i64 + 1)];
    let exactly = fixed_terms(set, FormulaId::L2, &a, &[1, 2]);
    Ok((
        BoundCertificate::assemble(FormulaId::L2, Side::Lower, Target::AtLeast, set, d, 2, at_least),
        BoundCertificate::assemble(FormulaId::L2, Side::Lower, Target::Exactly, set, d, 2, exactly),
    ))
}

/// The tightest aggregate over the applicable two-moment formulas, ties going
/// to the earlier of u1, u2, l1, l2.
pub fn best_l2<T: Scalar>(set: &MomentSet<T>, r: usize, target: Target, side: Side) -> Result<BoundCertificate<T>> {
    check_request(set, r, 2)?;
    let pick = |pair: (BoundCertificate<T>, BoundCertificate<T>)| match target {
        Target::AtLeast => pair.0,
        Target::Exactly => pair.1,
    };
    let candidates = match side {
        Side::Upper => vec![upper_u1(set, r, target), upper_u2(set, r).map(pick)],
        Side::Lower => {
            let l2 = if r == set.d() { lower_l2(set, None).map(pick) } else { Err(not_applicable("l2 needs r = d")) };
            vec![lower_l1(set, r, target), l2]
        }
    };
    let mut best: Option<BoundCertificate<T>> = None;
    for candidate in candidates {
        match candidate {
            Ok(cert) => match &best {
                Some(b) if !cert.is_tighter_than(b) => {}
                _ => best = Some(cert),
            },
            Err(e) if e.is_not_applicable() => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| not_applicable(format!("no two-moment {side} bound for r={r}, d={}, {target}", set.d())))
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

    fn fair(n: usize, d: usize) -> MomentSet<Q> {
        let sys = EventSystem::independent(&vec![q(1, 2); n]).unwrap();
        MomentSet::from_system(&sys, d, 2).unwrap()
    }

    #[test]
    fn union_bound_recovery() {
        let c = upper_u1(&fair(3, 0), 1, Target::AtLeast).unwrap();
        assert_eq!(c.value, q(3, 2));
        assert_eq!(c.clamped, q(1, 1));
    }

    #[test]
    fn fair_three_event_values() {
        assert_eq!(upper_u1(&fair(3, 1), 2, Target::AtLeast).unwrap().value, q(3, 4));
        assert_eq!(upper_u2(&fair(3, 0), 1).unwrap().0.value, q(1, 1));
        assert_eq!(upper_u2(&fair(3, 1), 2).unwrap().0.value, q(3, 4));
        assert_eq!(lower_l1(&fair(3, 0), 1, Target::AtLeast).unwrap().value, q(1, 2));
        assert_eq!(lower_l1(&fair(3, 1), 2, Target::AtLeast).unwrap().value, q(1, 4));
        let (p, e) = lower_l2(&fair(3, 1), None).unwrap();
        assert_eq!(p.value, q(3, 4));
        assert!(p.terms.iter().all(|t| t.m == Some(1)));
        assert_eq!(e.value, q(0, 1));
        assert_eq!(best_l2(&fair(3, 0), 1, Target::AtLeast, Side::Upper).unwrap().formula, FormulaId::U2);
    }

    #[test]
    fn u2_order_zero_ignores_second_moment() {
        for n in 2..=6 {
            for r in 1..n {
                let (p, _) = upper_u2(&fair(n, 0), r).unwrap();
                assert_eq!(p.terms[0].coefficients[1], q(0, 1));
            }
        }
    }

    #[test]
    fn applicability() {
        assert!(upper_u1(&fair(3, 1), 1, Target::AtLeast).unwrap_err().is_not_applicable());
        assert!(upper_u2(&fair(3, 1), 3).unwrap_err().is_not_applicable());
        assert!(lower_l1(&fair(3, 0), 2, Target::Exactly).unwrap_err().is_not_applicable());
        assert!(lower_l1(&fair(3, 0), 3, Target::Exactly).is_ok());
        assert!(lower_l2(&fair(3, 0), None).unwrap_err().is_not_applicable());
        assert!(matches!(lower_l2(&fair(3, 1), Some(3)), Err(Error::Argument(_))));
        assert!(best_l2(&fair(3, 0), 3, Target::Exactly, Side::Lower).is_ok());
        assert!(best_l2(&fair(3, 0), 2, Target::Exactly, Side::Lower).unwrap_err().is_not_applicable());
    }

    #[test]
    fn disjoint_events_pick_first_m() {
        let sys = EventSystem::<Q>::normalize(3, [(1, q(1, 4)), (2, q(1, 4)), (4, q(1, 4)), (0, q(1, 4))]).unwrap();
        let set = MomentSet::from_system(&sys, 1, 2).unwrap();
        let (p, _) = lower_l2(&set, None).unwrap();
        assert_eq!(p.value, q(3, 4));
        assert!(p.terms.iter().all(|t| t.m == Some(1)));
    }

    #[test]
    fn coefficients_match_engine() {
        for n in 2..=7usize {
            for d in 0..n {
                let f = MomentMatrix::<Q>::new(n, d, 2).unwrap();
                let width = n - d + 1;
                for r in d.max(1)..=n {
                    let set = MomentSet::from_system(&EventSystem::independent(&vec![q(1, 3); n]).unwrap(), d, 2).unwrap();
                    let mut certs = Vec::new();
                    certs.extend(upper_u1(&set, r, Target::AtLeast).ok());
                    if let Ok((p, e)) = upper_u2(&set, r) {
                        certs.push(p);
                        certs.push(e);
                    }
                    certs.extend(lower_l1(&set, r, Target::AtLeast).ok());
                    certs.extend(lower_l1(&set, r, Target::Exactly).ok());
                    if r == d {
                        for m in 1..=n - d {
                            if let Ok((p, e)) = lower_l2(&set, Some(m)) {
                                certs.push(p);
                                certs.push(e);
                            }
                        }
                    }
                    for cert in certs {
                        let v = TargetVector::new(cert.target, n, r, d).unwrap();
                        let term = &cert.terms[0];
                        let i = IndexSet::new(term.index_set.clone(), width).unwrap();
                        assert_eq!(term.coefficients, solve_coefficients(&f, &i, &v).unwrap(), "{}", cert.formula);
                    }
                }
            }
        }
    }
}
