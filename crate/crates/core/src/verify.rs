//! Randomized property suites run against the exact enumeration oracle.
//!
//! Every trial draws its own system from a ChaCha stream keyed by
//! `(seed, trial)`, so reports are identical for a given seed regardless of
//! scheduling.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{engine_bound_from, evaluate, jordan_bound, BoundCertificate, BoundRequest, FormulaId, MRule};
use crate::combinatorics::binomial;
use crate::conditional::{conditional_bound, conditional_systems, expectation_aggregate, PartitionField};
use crate::engine::{
    feasible_coefficients, induced_system, sharpness_witness, solve_coefficients, FeasibleSet, IndexSet, Side,
    Target, TargetVector,
};
use crate::error::Result;
use crate::io::system_to_json;
use crate::moments::{moments_from_system, verify_decomposition, z_vector, MomentMatrix, MomentSet};
use crate::scalar::{Rational, Scalar};
use crate::system::{EventSystem, OccurrenceDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Every applicable certificate brackets the oracle (rational arithmetic).
    Sandwich,
    /// The same in `f64` with the float tolerance.
    SandwichFloat,
    /// Per-tuple decomposition of `P_r` and `p_r`.
    Decomposition,
    /// Selected `m` attains the full-sweep extremum.
    OptimalM,
    /// Closed forms equal the engine solve; engine search is at least as tight.
    EngineAgreement,
    /// Nonnegative witnesses induce distributions attaining the bound.
    WitnessClosure,
    /// The full system reproduces the oracle.
    Jordan,
    /// Per-block and aggregated conditional bounds bracket the oracle.
    Conditional,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Sandwich,
        Suite::SandwichFloat,
        Suite::Decomposition,
        Suite::OptimalM,
        Suite::EngineAgreement,
        Suite::WitnessClosure,
        Suite::Jordan,
        Suite::Conditional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Sandwich => "sandwich",
            Suite::SandwichFloat => "sandwich-float",
            Suite::Decomposition => "decomposition",
            Suite::OptimalM => "optimal-m",
            Suite::EngineAgreement => "engine-agreement",
            Suite::WitnessClosure => "witness-closure",
            Suite::Jordan => "jordan",
            Suite::Conditional => "conditional",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Deliberate defects for checking that the suites catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// u1 divides by `C(r+1, d+1)` instead of `C(r, d+1)`.
    U1OffByOne,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    pub suites: Vec<Suite>,
    pub mutation: Option<Mutation>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { trials: 1000, n_min: 2, n_max: 8, seed: 42, suites: Suite::ALL.to_vec(), mutation: None }
    }
}

impl VerifyConfig {
    pub fn only(suite: Suite, trials: usize) -> Self {
        VerifyConfig { trials, suites: vec![suite], ..Self::default() }
    }
}

/// A minimal reproducer: the system and the request that failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub suite: Suite,
    pub trial: usize,
    pub n: usize,
    pub request: String,
    pub detail: String,
    /// The system in the event-system file format.
    pub system: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: u64,
    pub failures: u64,
    /// Suite-specific count: strict improvements for `conditional`,
    /// nonnegative witnesses for `witness-closure`.
    pub observed: u64,
    pub first_failure: Option<Failure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn suite(&self, suite: Suite) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.suite == suite)
    }

    /// Plain-text summary, one line per suite followed by reproducers.
    pub fn render(&self) -> String {
        let c = &self.config;
        let mut out = format!("verify seed={} trials={} n={}..={}\n", c.seed, c.trials, c.n_min, c.n_max);
        if let Some(m) = c.mutation {
            let _ = writeln!(out, "mutation {m:?}");
        }
        for s in &self.suites {
            let status = if s.passed() { "pass" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{:<17} checks={:<9} failures={:<6} observed={:<7} {status}",
                s.suite.name(),
                s.checks,
                s.failures,
                s.observed
            );
        }
        for f in self.suites.iter().filter_map(|s| s.first_failure.as_ref()) {
            let _ = writeln!(out, "reproducer {} trial={} n={}", f.suite, f.trial, f.n);
            let _ = writeln!(out, "  request: {}", f.request);
            let _ = writeln!(out, "  detail:  {}", f.detail);
            let _ = writeln!(out, "  system:  {}", f.system);
        }
        out
    }
}

/// The generator for `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// A random system with small integer weights, normalized. Mixes dense,
/// sparse, product-form and near-degenerate shapes.
pub fn random_system(rng: &mut impl Rng, n: usize) -> EventSystem<Rational> {
    let size = 1u64 << n;
    let mut weights: Vec<i64> = match rng.gen_range(0..4) {
        0 => (0..size).map(|_| rng.gen_range(0..10)).collect(),
        1 => (0..size).map(|_| if rng.gen_bool(0.25) { rng.gen_range(1..6) } else { 0 }).collect(),
        2 => {
            let p: Vec<i64> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            (0..size)
                .map(|mask| (0..n).map(|k| if mask >> k & 1 == 1 { p[k] } else { 4 - p[k] }).product())
                .collect()
        }
        _ => {
            let mut w = vec![0; size as usize];
            for _ in 0..rng.gen_range(1..4) {
                w[rng.gen_range(0..size) as usize] += rng.gen_range(1..4);
            }
            w
        }
    };
    if weights.iter().all(|&w| w == 0) {
        weights[size as usize - 1] = 1;
    }
    let atoms = weights.into_iter().enumerate().map(|(m, w)| (m as u64, Rational::new(w, 1)));
    EventSystem::normalize(n, atoms).expect("positive total weight")
}

/// A random partition into one to four nonempty blocks.
pub fn random_partition(rng: &mut impl Rng, n: usize) -> PartitionField {
    let k = rng.gen_range(1..=4usize);
    let mut blocks = vec![Vec::new(); k];
    for mask in 0..1u64 << n {
        blocks[rng.gen_range(0..k)].push(mask);
    }
    blocks.retain(|b| !b.is_empty());
    PartitionField::new(n, blocks).expect("blocks cover every atom")
}

pub fn to_float(sys: &EventSystem<Rational>) -> EventSystem<f64> {
    EventSystem::normalize(sys.n(), sys.support().map(|(m, w)| (m, w.to_f64()))).expect("positive total weight")
}

type EngineKey = (usize, usize, usize, usize, Target, Side);
type SolveKey = (usize, usize, usize, usize, Target, Vec<usize>);

/// Memoized index-set enumeration and coefficient solves, shared by trials.
#[derive(Default)]
pub struct EngineCache {
    feasible: Mutex<HashMap<EngineKey, Arc<Vec<FeasibleSet<Rational>>>>>,
    solved: Mutex<HashMap<SolveKey, Option<Vec<Rational>>>>,
}

impl EngineCache {
    pub fn feasible(&self, n: usize, d: usize, ell: usize, r: usize, target: Target, side: Side) -> Result<Arc<Vec<FeasibleSet<Rational>>>> {
        let key = (n, d, ell, r, target, side);
        if let Some(hit) = self.feasible.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let f = MomentMatrix::new(n, d, ell)?;
        let v = TargetVector::new(target, n, r, d)?;
        let sets = Arc::new(feasible_coefficients(&f, &v, side)?);
        self.feasible.lock().expect("cache lock").insert(key, sets.clone());
        Ok(sets)
    }

    pub fn solve(&self, n: usize, d: usize, ell: usize, r: usize, target: Target, positions: &[usize]) -> Option<Vec<Rational>> {
        let key = (n, d, ell, r, target, positions.to_vec());
        if let Some(hit) = self.solved.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let solved = (|| {
            let f = MomentMatrix::new(n, d, ell).ok()?;
            let v = TargetVector::new(target, n, r, d).ok()?;
            let i = IndexSet::new(positions.to_vec(), n - d + 1).ok()?;
            solve_coefficients(&f, &i, &v).ok()
        })();
        self.solved.lock().expect("cache lock").insert(key, solved.clone());
        solved
    }
}

/// Accumulates checks for one suite within one trial.
struct Tally<'a> {
    suite: Suite,
    trial: usize,
    sys: &'a EventSystem<Rational>,
    checks: u64,
    failures: u64,
    observed: u64,
    first: Option<Failure>,
}

impl<'a> Tally<'a> {
    fn new(suite: Suite, trial: usize, sys: &'a EventSystem<Rational>) -> Self {
        Tally { suite, trial, sys, checks: 0, failures: 0, observed: 0, first: None }
    }

    fn check(&mut self, ok: bool, request: impl FnOnce() -> String, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if ok {
            return;
        }
        self.failures += 1;
        if self.first.is_none() {
            self.first = Some(Failure {
                suite: self.suite,
                trial: self.trial,
                n: self.sys.n(),
                request: request(),
                detail: detail(),
                system: system_to_json(self.sys).to_string(),
            });
        }
    }

    fn error(&mut self, request: impl FnOnce() -> String, e: &crate::error::Error) {
        let msg = e.to_string();
        self.check(false, request, || msg);
    }

    fn into_report(self) -> SuiteReport {
        SuiteReport {
            suite: self.suite,
            checks: self.checks,
            failures: self.failures,
            observed: self.observed,
            first_failure: self.first,
        }
    }
}

fn describe(d: usize, ell: usize, r: usize, target: Target, side: Side, formula: Option<FormulaId>) -> String {
    let formula = formula.map_or("best".to_string(), |f| f.to_string());
    format!("d={d} ell={ell} r={r} target={target} side={side} formula={formula}")
}

fn exact<T: Scalar>(dist: &OccurrenceDistribution<T>, r: usize, target: Target) -> T {
    match target {
        Target::AtLeast => dist.at_least(r),
        Target::Exactly => dist.exactly(r),
    }
}

/// The closed-form families for a side at `ell` moments.
pub fn families(ell: usize, side: Side) -> &'static [FormulaId] {
    match (ell, side) {
        (2, Side::Upper) => &[FormulaId::U1, FormulaId::U2],
        (2, Side::Lower) => &[FormulaId::L1, FormulaId::L2],
        (3, Side::Upper) => &[FormulaId::Ub1, FormulaId::Ub2, FormulaId::Ub3],
        (3, Side::Lower) => &[FormulaId::Lb1, FormulaId::Lb2, FormulaId::Lb3],
        _ => &[],
    }
}

const TARGETS: [Target; 2] = [Target::AtLeast, Target::Exactly];
const SIDES: [Side; 2] = [Side::Upper, Side::Lower];

/// Every `(d, ell, r)` with `ell ∈ {2, 3}` admissible for `n`.
fn grid(n: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for d in 0..=n {
        for ell in [2, 3] {
            if ell > n - d + 1 {
                continue;
            }
            for r in d.max(1)..=n {
                out.push((d, ell, r));
            }
        }
    }
    out
}

/// Moment sets with three (or as many as admissible) moments per order `d`.
fn moment_sets<T: Scalar>(sys: &EventSystem<T>) -> Result<Vec<MomentSet<T>>> {
    let n = sys.n();
    (0..=n).map(|d| MomentSet::from_system(sys, d, 3.min(n - d + 1))).collect()
}

fn apply_mutation<T: Scalar>(cert: &mut BoundCertificate<T>, mutation: Option<Mutation>) {
    if mutation == Some(Mutation::U1OffByOne) && cert.formula == FormulaId::U1 {
        let (r, d) = (cert.r as u64, cert.d as u64);
        let factor = binomial::<T>(r, d + 1) / binomial::<T>(r + 1, d + 1);
        for t in &mut cert.terms {
            t.value = t.value.clone() * factor.clone();
            for a in &mut t.coefficients {
                *a = a.clone() * factor.clone();
            }
        }
        cert.value = cert.value.clone() * factor;
        cert.clamped = cert.value.clamp_unit();
    }
}

fn sandwich<T: Scalar>(tally: &mut Tally<'_>, sys: &EventSystem<T>, mutation: Option<Mutation>) {
    let n = sys.n();
    let dist = sys.exact_occurrence();
    let sets = match moment_sets(sys) {
        Ok(s) => s,
        Err(e) => return tally.error(|| "moments".into(), &e),
    };
    for (d, ell, r) in grid(n) {
        for target in TARGETS {
            let truth = exact(&dist, r, target);
            for side in SIDES {
                let formulas = families(ell, side).iter().map(|&f| Some(f)).chain([None]);
                for formula in formulas {
                    let req = BoundRequest { r, ell, target, side, formula, m: None };
                    let mut cert = match evaluate(&sets[d], &req) {
                        Ok(c) => c,
                        Err(e) if e.is_not_applicable() => continue,
                        Err(e) => {
                            tally.error(|| describe(d, ell, r, target, side, formula), &e);
                            continue;
                        }
                    };
                    apply_mutation(&mut cert, mutation);
                    let in_unit = cert.clamped >= T::zero() && cert.clamped <= T::one();
                    tally.check(
                        in_unit && cert.brackets(&truth),
                        || describe(d, ell, r, target, side, formula),
                        || format!("bound {} (raw {}) vs exact {truth}", cert.clamped, cert.value),
                    );
                }
            }
        }
    }
}

fn decomposition(tally: &mut Tally<'_>) {
    let sys = tally.sys;
    let n = sys.n();
    for r in 0..=n {
        for d in 0..=r {
            let res = verify_decomposition(sys, r, d);
            tally.check(res.is_ok(), || format!("r={r} d={d}"), || format!("{:?}", res.err()));
        }
    }
}

fn optimal_m(tally: &mut Tally<'_>) {
    let sys = tally.sys;
    let n = sys.n();
    let sets = match moment_sets(sys) {
        Ok(s) => s,
        Err(e) => return tally.error(|| "moments".into(), &e),
    };
    let cases = [
        (FormulaId::L2, MRule::L2, Side::Lower, Target::AtLeast),
        (FormulaId::Ub1, MRule::Ub1, Side::Upper, Target::AtLeast),
        (FormulaId::Ub1, MRule::Ub1, Side::Upper, Target::Exactly),
        (FormulaId::Ub3, MRule::Ub3, Side::Upper, Target::AtLeast),
        (FormulaId::Ub3, MRule::Ub3, Side::Upper, Target::Exactly),
        (FormulaId::Lb2, MRule::Lb2, Side::Lower, Target::AtLeast),
        (FormulaId::Lb3, MRule::Lb3, Side::Lower, Target::AtLeast),
    ];
    for d in 0..=n {
        for r in d.max(1)..=n {
            for (formula, rule, side, target) in cases {
                let req = BoundRequest::formula(r, target, side, formula);
                let cert = match evaluate(&sets[d], &req) {
                    Ok(c) => c,
                    Err(e) if e.is_not_applicable() => continue,
                    Err(e) => {
                        tally.error(|| describe(d, req.ell, r, target, side, Some(formula)), &e);
                        continue;
                    }
                };
                let (lo, hi) = rule.range(n, r, d);
                let sweep: Vec<Vec<Rational>> = match (lo..=hi).map(|m| rule.coefficients(target, n, r, d, m).map(|c| c.values)).collect() {
                    Ok(s) => s,
                    Err(e) => {
                        tally.error(|| describe(d, req.ell, r, target, side, Some(formula)), &e);
                        continue;
                    }
                };
                for (term, mv) in cert.terms.iter().zip(sets[d].vectors()) {
                    let values = sweep.iter().map(|a| crate::bounds::dot(a, &mv.values));
                    let best = match side {
                        Side::Upper => values.min_by(|a, b| a.partial_cmp(b).expect("rationals are ordered")),
                        Side::Lower => values.max_by(|a, b| a.partial_cmp(b).expect("rationals are ordered")),
                    }
                    .expect("nonempty m-range");
                    tally.check(
                        term.value == best,
                        || format!("{} j={}", describe(d, req.ell, r, target, side, Some(formula)), term.j),
                        || format!("m={:?} gives {}, sweep extremum {best}", term.m, term.value),
                    );
                }
            }
        }
    }
}

fn engine_agreement(tally: &mut Tally<'_>, cache: &EngineCache) {
    let sys = tally.sys;
    let n = sys.n();
    let sets = match moment_sets(sys) {
        Ok(s) => s,
        Err(e) => return tally.error(|| "moments".into(), &e),
    };
    for (d, ell, r) in grid(n) {
        let set = if sets[d].ell() == ell { sets[d].clone() } else { sets[d].truncate(ell).expect("ell <= 3") };
        for target in TARGETS {
            for side in SIDES {
                for &formula in families(ell, side) {
                    let req = BoundRequest { r, ell, target, side, formula: Some(formula), m: None };
                    let cert = match evaluate(&set, &req) {
                        Ok(c) => c,
                        Err(e) if e.is_not_applicable() => continue,
                        Err(e) => {
                            tally.error(|| describe(d, ell, r, target, side, Some(formula)), &e);
                            continue;
                        }
                    };
                    let mut seen: Vec<&Vec<usize>> = Vec::new();
                    for term in &cert.terms {
                        if seen.contains(&&term.index_set) {
                            continue;
                        }
                        seen.push(&term.index_set);
                        let solved = cache.solve(n, d, ell, r, target, &term.index_set);
                        tally.check(
                            solved.as_ref() == Some(&term.coefficients),
                            || format!("{} i={:?}", describe(d, ell, r, target, side, Some(formula)), term.index_set),
                            || format!("closed form {:?}, engine {:?}", term.coefficients, solved),
                        );
                    }
                }
                let best = match evaluate(&set, &BoundRequest::best(r, ell, target, side)) {
                    Ok(c) => c,
                    Err(e) if e.is_not_applicable() => continue,
                    Err(e) => {
                        tally.error(|| describe(d, ell, r, target, side, None), &e);
                        continue;
                    }
                };
                let engine = cache
                    .feasible(n, d, ell, r, target, side)
                    .and_then(|fs| engine_bound_from(&set, r, target, side, &fs));
                match engine {
                    Ok(e) => {
                        let ok = match side {
                            Side::Upper => e.value <= best.value,
                            Side::Lower => e.value >= best.value,
                        };
                        tally.check(
                            ok,
                            || describe(d, ell, r, target, side, Some(FormulaId::Engine)),
                            || format!("engine {} vs closed form {}", e.value, best.value),
                        );
                    }
                    Err(e) => tally.error(|| describe(d, ell, r, target, side, Some(FormulaId::Engine)), &e),
                }
            }
        }
    }
}

/// Checks a witness for one sampled term of each best certificate at a few
/// random requests (induced systems are comparatively expensive).
fn witness_closure(tally: &mut Tally<'_>, rng: &mut ChaCha8Rng, cache: &EngineCache) {
    let sys = tally.sys;
    let n = sys.n();
    let sets = match moment_sets(sys) {
        Ok(s) => s,
        Err(e) => return tally.error(|| "moments".into(), &e),
    };
    let grid = grid(n);
    for _ in 0..12 {
        let (d, ell, r) = grid[rng.gen_range(0..grid.len())];
        let target = TARGETS[rng.gen_range(0..2)];
        let side = SIDES[rng.gen_range(0..2)];
        let set = if sets[d].ell() == ell { sets[d].clone() } else { sets[d].truncate(ell).expect("ell <= 3") };
        let closed = evaluate(&set, &BoundRequest::best(r, ell, target, side));
        let engine = cache.feasible(n, d, ell, r, target, side).and_then(|fs| engine_bound_from(&set, r, target, side, &fs));
        let f = MomentMatrix::<Rational>::new(n, d, ell).expect("admissible ell");
        let v = TargetVector::new(target, n, r, d).expect("d <= r <= n");
        for cert in [closed, engine].into_iter().filter_map(|c| c.ok()) {
            let idx = rng.gen_range(0..cert.terms.len());
            let term = &cert.terms[idx];
            let s = &set.vectors()[idx].values;
            let request = || format!("{} j={} i={:?}", describe(d, ell, r, target, side, Some(cert.formula)), term.j, term.index_set);
            let witness = IndexSet::new(term.index_set.clone(), n - d + 1).and_then(|i| sharpness_witness(&f, &i, s));
            let witness = match witness {
                Ok(w) => w,
                Err(e) => {
                    tally.error(request, &e);
                    continue;
                }
            };
            tally.check(f.apply(&witness.z).ok().as_ref() == Some(s), request, || "F z* differs from s".into());
            if !witness.nonnegative {
                continue;
            }
            tally.observed += 1;
            let closure = (|| -> Result<(bool, bool, bool)> {
                let induced = induced_system(&witness, n, &term.j)?;
                let moments = moments_from_system(&induced, &term.j, ell)?;
                let z = z_vector(&induced, &term.j)?.values;
                let attained: Rational = z.iter().zip(v.bits()).filter(|(_, b)| **b).map(|(x, _)| x.clone()).sum();
                let again = sharpness_witness(&f, &IndexSet::new(term.index_set.clone(), n - d + 1)?, &moments.values)?;
                Ok((moments.values == *s, attained == term.value, again.z == witness.z))
            })();
            match closure {
                Ok((same_moments, attained, stable)) => {
                    tally.check(same_moments, request, || "induced moments differ from s".into());
                    tally.check(attained, request, || format!("induced target differs from Z*={}", term.value));
                    tally.check(stable, request, || "witness not reproduced from induced moments".into());
                }
                Err(e) => tally.error(request, &e),
            }
        }
    }
}

fn jordan(tally: &mut Tally<'_>) {
    let sys = tally.sys;
    let n = sys.n();
    let dist = sys.exact_occurrence();
    for d in 0..=n {
        let set = match MomentSet::from_system(sys, d, n - d + 1) {
            Ok(s) => s,
            Err(e) => return tally.error(|| format!("d={d} full moments"), &e),
        };
        for r in d..=n {
            for target in TARGETS {
                let truth = exact(&dist, r, target);
                match jordan_bound(&set, r, target) {
                    Ok(c) => tally.check(
                        c.value == truth,
                        || describe(d, n - d + 1, r, target, Side::Upper, Some(FormulaId::Jordan)),
                        || format!("full system {} vs exact {truth}", c.value),
                    ),
                    Err(e) => tally.error(|| describe(d, n - d + 1, r, target, Side::Upper, Some(FormulaId::Jordan)), &e),
                }
            }
        }
    }
}

fn conditional(tally: &mut Tally<'_>, rng: &mut ChaCha8Rng) {
    let sys = tally.sys;
    let n = sys.n();
    let partition = random_partition(rng, n);
    let blocks = match conditional_systems(sys, &partition) {
        Ok(b) => b,
        Err(e) => return tally.error(|| "partition".into(), &e),
    };
    let block_dists: HashMap<usize, OccurrenceDistribution<Rational>> =
        blocks.iter().map(|b| (b.block, b.system.exact_occurrence())).collect();
    let dist = sys.exact_occurrence();
    let sets = match moment_sets(sys) {
        Ok(s) => s,
        Err(e) => return tally.error(|| "moments".into(), &e),
    };
    for (d, ell, r) in grid(n) {
        for target in TARGETS {
            let truth = exact(&dist, r, target);
            for side in SIDES {
                let req = BoundRequest::best(r, ell, target, side);
                let request = || format!("{} blocks={:?}", describe(d, ell, r, target, side, None), partition.blocks());
                let per_block = match conditional_bound(sys, &partition, d, &req) {
                    Ok(b) => b,
                    Err(e) if e.is_not_applicable() => continue,
                    Err(e) => {
                        tally.error(request, &e);
                        continue;
                    }
                };
                for b in &per_block {
                    let block_truth = exact(&block_dists[&b.block], r, target);
                    tally.check(
                        b.certificate.brackets(&block_truth),
                        request,
                        || format!("block {}: bound {} vs conditional exact {block_truth}", b.block, b.certificate.clamped),
                    );
                }
                let unconditional = evaluate(&sets[d], &req).ok();
                match expectation_aggregate(per_block, unconditional) {
                    Ok(agg) => {
                        if agg.strictly_improves() {
                            tally.observed += 1;
                        }
                        tally.check(
                            agg.brackets(&truth),
                            request,
                            || format!("aggregate {} vs exact {truth}", agg.clamped),
                        );
                    }
                    Err(e) => tally.error(request, &e),
                }
            }
        }
    }
}

fn run_trial(config: &VerifyConfig, trial: usize, cache: &EngineCache) -> Vec<SuiteReport> {
    let mut rng = trial_rng(config.seed, trial);
    let n = rng.gen_range(config.n_min..=config.n_max);
    let sys = random_system(&mut rng, n);
    config
        .suites
        .iter()
        .map(|&suite| {
            let mut tally = Tally::new(suite, trial, &sys);
            // Each suite draws from its own stream so enabling one suite does
            // not shift another's samples.
            let mut suite_rng = trial_rng(config.seed ^ (suite as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15), trial);
            match suite {
                Suite::Sandwich => sandwich(&mut tally, &sys, config.mutation),
                Suite::SandwichFloat => sandwich(&mut tally, &to_float(&sys), config.mutation),
                Suite::Decomposition => decomposition(&mut tally),
                Suite::OptimalM => optimal_m(&mut tally),
                Suite::EngineAgreement => engine_agreement(&mut tally, cache),
                Suite::WitnessClosure => witness_closure(&mut tally, &mut suite_rng, cache),
                Suite::Jordan => jordan(&mut tally),
                Suite::Conditional => conditional(&mut tally, &mut suite_rng),
            }
            tally.into_report()
        })
        .collect()
}

/// Runs the configured suites over `config.trials` random systems.
pub fn run(config: &VerifyConfig) -> VerifyReport {
    run_with_cache(config, &EngineCache::default())
}

pub fn run_with_cache(config: &VerifyConfig, cache: &EngineCache) -> VerifyReport {
    assert!(config.n_min >= 1 && config.n_min <= config.n_max, "n range must be nonempty and start at 1 or more");
    let per_trial: Vec<Vec<SuiteReport>> = (0..config.trials).into_par_iter().map(|t| run_trial(config, t, cache)).collect();
    let suites = config
        .suites
        .iter()
        .enumerate()
        .map(|(k, &suite)| {
            let mut total = SuiteReport { suite, checks: 0, failures: 0, observed: 0, first_failure: None };
            for reports in &per_trial {
                let r = &reports[k];
                total.checks += r.checks;
                total.failures += r.failures;
                total.observed += r.observed;
                if total.first_failure.is_none() {
                    total.first_failure = r.first_failure.clone();
                }
            }
            total
        })
        .collect();
    VerifyReport { config: config.clone(), suites }
}
