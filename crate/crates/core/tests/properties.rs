use num_rational::BigRational;
use proptest::prelude::*;

use sharpbounds_core::engine::{check_feasibility, TargetVector};
use sharpbounds_core::moments::{moments_from_system, moments_via_factorial, z_vector};
use sharpbounds_core::{
    enumerate_index_tuples, evaluate, BoundRequest, EventSystem, MomentMatrix, MomentSet, Rational, Scalar, Side,
    Target,
};

type Q = Rational;

fn system() -> impl Strategy<Value = EventSystem<Q>> {
    (1usize..=5)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(0u8..=6, 1usize << n)))
        .prop_filter("some mass", |(_, w)| w.iter().any(|&x| x > 0))
        .prop_map(|(n, w)| {
            let atoms = w.into_iter().enumerate().map(|(mask, x)| (mask as u64, Q::from_i64(x as i64)));
            EventSystem::normalize(n, atoms).unwrap()
        })
}

fn system_with_perm() -> impl Strategy<Value = (EventSystem<Q>, Vec<usize>)> {
    system().prop_flat_map(|sys| {
        let n = sys.n();
        (Just(sys), Just((1..=n).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn requests(n: usize) -> Vec<(usize, usize, BoundRequest)> {
    let mut out = Vec::new();
    for d in 0..=n {
        for r in d.max(1)..=n {
            for ell in [2, 3].into_iter().filter(|&ell| ell <= n - d + 1) {
                for side in [Side::Upper, Side::Lower] {
                    for target in [Target::AtLeast, Target::Exactly] {
                        out.push((d, ell, BoundRequest::best(r, ell, target, side)));
                    }
                }
            }
        }
    }
    out
}

fn exact(sys: &EventSystem<Q>, req: &BoundRequest) -> Q {
    let dist = sys.exact_occurrence();
    match req.target {
        Target::AtLeast => dist.at_least(req.r),
        Target::Exactly => dist.exactly(req.r),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_bracket_the_exact_value(sys in system()) {
        for (d, ell, req) in requests(sys.n()) {
            let set = MomentSet::from_system(&sys, d, ell).unwrap();
            let Ok(cert) = evaluate(&set, &req) else { continue };
            let truth = exact(&sys, &req);
            prop_assert!(cert.brackets(&truth), "d={d} {req:?}: bound {} vs exact {truth}", cert.value);
        }
    }

    #[test]
    fn certificate_coefficients_are_feasible(sys in system()) {
        let n = sys.n();
        for (d, ell, req) in requests(n) {
            let set = MomentSet::from_system(&sys, d, ell).unwrap();
            let Ok(cert) = evaluate(&set, &req) else { continue };
            let f = MomentMatrix::<Q>::new(n, d, ell).unwrap();
            let v = TargetVector::new(req.target, n, req.r, d).unwrap();
            for term in &cert.terms {
                let mut a = vec![Q::zero(); ell];
                a[..term.coefficients.len()].clone_from_slice(&term.coefficients);
                prop_assert!(check_feasibility(&f, &a, &v).unwrap().admits(req.side), "d={d} {req:?} j={}", term.j);
            }
        }
    }

    #[test]
    fn bounds_are_invariant_under_relabeling((sys, perm) in system_with_perm()) {
        let image = sys.relabel(&perm).unwrap();
        for (d, ell, req) in requests(sys.n()) {
            let a = evaluate(&MomentSet::from_system(&sys, d, ell).unwrap(), &req).map(|c| c.value);
            let b = evaluate(&MomentSet::from_system(&image, d, ell).unwrap(), &req).map(|c| c.value);
            prop_assert_eq!(a.ok(), b.ok(), "d={} {:?}", d, req);
        }
    }

    #[test]
    fn moments_are_the_image_of_z(sys in system()) {
        let n = sys.n();
        for d in 0..=n {
            let ell = n - d + 1;
            let f = MomentMatrix::<Q>::new(n, d, ell).unwrap();
            for j in enumerate_index_tuples(n, d).unwrap() {
                let z = z_vector(&sys, &j).unwrap();
                let direct = moments_from_system(&sys, &j, ell).unwrap();
                prop_assert_eq!(&f.apply(&z.values).unwrap(), &direct.values);
                prop_assert_eq!(&moments_via_factorial(&sys, &j, ell).unwrap().values, &direct.values);
            }
        }
    }

    #[test]
    fn rational_arithmetic_matches_big(a in any::<i64>(), b in 1i64..=i64::MAX, c in any::<i64>(), e in 1i64..=i64::MAX) {
        let x = Rational::new(a, b);
        let y = Rational::new(c, e);
        let bx = BigRational::new(a.into(), b.into());
        let by = BigRational::new(c.into(), e.into());
        prop_assert_eq!((&x + &y).to_big(), &bx + &by);
        prop_assert_eq!((&x - &y).to_big(), &bx - &by);
        prop_assert_eq!((&x * &y).to_big(), &bx * &by);
        prop_assert_eq!(((&x * &y) * (&x * &y)).to_big(), (&bx * &by) * (&bx * &by));
        if c != 0 {
            prop_assert_eq!((&x / &y).to_big(), &bx / &by);
        }
        prop_assert_eq!(x.cmp(&y), bx.cmp(&by));
        prop_assert_eq!(x.to_string(), bx.to_string());
    }
}
