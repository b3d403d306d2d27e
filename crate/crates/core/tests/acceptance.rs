//! Acceptance criteria. Prints one line per criterion and exits nonzero if
//! any fails. Exact rationals throughout; the float sandwich uses 1e-9.

use std::process::ExitCode;
use std::time::Instant;

use sharpbounds_core::bounds::{lower_l1, lower_lb2, upper_u1, upper_ub2};
use sharpbounds_core::conditional::conditional_report;
use sharpbounds_core::io::{parse_partition, parse_system};
use sharpbounds_core::verify::{random_system, run_with_cache, trial_rng, EngineCache, Suite, VerifyConfig, VerifyReport};
use sharpbounds_core::{BoundRequest, EventSystem, FormulaId, MomentSet, Rational, Scalar, Side, Target};

const SEED: u64 = 42;

struct Outcome {
    passed: bool,
    summary: String,
}

fn suites(cache: &EngineCache, trials: usize, list: &[Suite]) -> (VerifyReport, Outcome) {
    let config = VerifyConfig { trials, suites: list.to_vec(), seed: SEED, ..VerifyConfig::default() };
    let report = run_with_cache(&config, cache);
    let summary = report
        .suites
        .iter()
        .map(|s| format!("{} {} checks, {} failures", s.suite, s.checks, s.failures))
        .collect::<Vec<_>>()
        .join("; ");
    let outcome = Outcome { passed: report.passed(), summary };
    if !report.passed() {
        eprintln!("{}", report.render());
    }
    (report, outcome)
}

fn q(a: i64, b: i64) -> Rational {
    Rational::new(a, b)
}

fn sandwich(cache: &EngineCache) -> Outcome {
    suites(cache, 1000, &[Suite::Sandwich, Suite::SandwichFloat]).1
}

fn sharpness_fixture() -> Outcome {
    let sys: EventSystem<Rational> = parse_system(include_str!("fixtures/fair3.system.json")).unwrap();
    let set = MomentSet::from_system(&sys, 1, 3).unwrap();
    let (ub_p, ub_e) = upper_ub2(&set, 2).unwrap();
    let (lb_p, lb_e) = lower_lb2(&set, 2, None).unwrap();
    let exact_p = sys.exact_at_least(2).unwrap();
    let exact_e = sys.exact_occurrence().exactly(2);
    let passed = exact_p == q(1, 2)
        && exact_e == q(3, 8)
        && ub_p.value == exact_p
        && lb_p.value == exact_p
        && ub_e.value == exact_e
        && lb_e.value == exact_e;
    Outcome {
        passed,
        summary: format!(
            "P_2: upper {} lower {} exact {exact_p}; p_2: upper {} lower {} exact {exact_e}",
            ub_p.value, lb_p.value, ub_e.value, lb_e.value
        ),
    }
}

fn classical_recovery() -> Outcome {
    let mut failures = 0;
    for trial in 0..100 {
        let mut rng = trial_rng(SEED, trial);
        let n = 2 + trial % 7;
        let sys = random_system(&mut rng, n);
        let set = MomentSet::from_system(&sys, 0, 2).unwrap();
        let union: Rational = (1..=n).map(|k| sys.event_probability(k).unwrap()).sum();
        let dist = sys.exact_occurrence();
        let mean: Rational = (1..=n).map(|i| Rational::from_i64(i as i64) * dist.exactly(i)).sum();
        let u1 = upper_u1(&set, 1, Target::AtLeast).unwrap().value;
        let l1 = lower_l1(&set, 1, Target::AtLeast).unwrap().value;
        if u1 != union || l1 != mean / Rational::from_i64(n as i64) {
            failures += 1;
        }
    }
    Outcome { passed: failures == 0, summary: format!("100 systems, {failures} mismatches") }
}

fn improvement_fixture() -> Outcome {
    let sys: EventSystem<Rational> = parse_system(include_str!("fixtures/conditional_improvement.system.json")).unwrap();
    let part = parse_partition(include_str!("fixtures/conditional_improvement.partition.json"), 3).unwrap();
    let req = BoundRequest::formula(1, Target::AtLeast, Side::Lower, FormulaId::L2);
    let agg = conditional_report(&sys, &part, 1, &req).unwrap();
    let exact = sys.exact_at_least(1).unwrap();
    let unconditional = agg.unconditional.as_ref().unwrap().value.clone();
    let passed = agg.strictly_improves() && agg.brackets(&exact) && unconditional == q(29, 39) && agg.value == q(12, 13);
    Outcome {
        passed,
        summary: format!("fixture: unconditional {unconditional}, aggregated {}, exact {exact}", agg.value),
    }
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() -> ExitCode {
    let start = Instant::now();
    let cache = EngineCache::default();
    let criteria: Vec<(&str, Check<'_>)> = vec![
        ("sandwich (1000 systems, rational + float)", Box::new(|| sandwich(&cache))),
        ("sharpness fixture (3 fair events, d=1, r=2)", Box::new(sharpness_fixture)),
        ("classical recovery (union bound, mean/n)", Box::new(classical_recovery)),
        ("decomposition identity (100 systems)", Box::new(|| suites(&cache, 100, &[Suite::Decomposition]).1)),
        ("optimal m attains sweep extremum (200 systems)", Box::new(|| suites(&cache, 200, &[Suite::OptimalM]).1)),
        ("closed forms agree with engine (200 systems)", Box::new(|| suites(&cache, 200, &[Suite::EngineAgreement]).1)),
        (
            "witness closure (200 systems)",
            Box::new(|| {
                let (report, mut outcome) = suites(&cache, 200, &[Suite::WitnessClosure]);
                let observed = report.suites[0].observed;
                outcome.passed &= observed > 0;
                outcome.summary += &format!(", {observed} nonnegative witnesses");
                outcome
            }),
        ),
        ("full-system exactness (100 systems)", Box::new(|| suites(&cache, 100, &[Suite::Jordan]).1)),
        (
            "conditional validity (200 pairs) + strict improvement fixture",
            Box::new(|| {
                let (report, random) = suites(&cache, 200, &[Suite::Conditional]);
                let fixture = improvement_fixture();
                Outcome {
                    passed: random.passed && fixture.passed,
                    summary: format!("{}, {} strict improvements seen; {}", random.summary, report.suites[0].observed, fixture.summary),
                }
            }),
        ),
    ];
    let mut all = true;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        all &= outcome.passed;
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("criterion {}: {status} {name} [{:.1}s] {}", k + 1, t.elapsed().as_secs_f64(), outcome.summary);
    }
    println!("acceptance: {} in {:.1}s", if all { "all criteria pass" } else { "FAILED" }, start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
