use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use sharpbounds_core::conditional::{conditional_report, conditional_systems};
use sharpbounds_core::engine::{induced_system, sharpness_witness, IndexSet, TargetVector};
use sharpbounds_core::io::{parse_moments, parse_partition, parse_system, system_to_json};
use sharpbounds_core::verify::{self, Mutation, Suite, VerifyConfig, VerifyReport};
use sharpbounds_core::{
    evaluate, BoundCertificate, BoundRequest, Error, EventSystem, FormulaId, MomentSet, Scalar, Side, Target,
};

use crate::args::{Format, MutationArg, RequestArgs, Source};
use crate::Usage;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_system<T: Scalar>(path: &Path) -> Result<EventSystem<T>> {
    let text = read(path)?;
    parse_system(&text).with_context(|| path.display().to_string())
}

fn load_moments<T: Scalar>(path: &Path) -> Result<MomentSet<T>> {
    let text = read(path)?;
    parse_moments(&text).with_context(|| path.display().to_string())
}

/// Serializes `doc` as JSON, or `rows` as CSV with a header line.
fn emit<J: Serialize, R: Serialize>(format: Format, doc: &J, rows: &[R]) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(doc)? + "\n"),
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in rows {
                writer.serialize(row)?;
            }
            Ok(String::from_utf8(writer.into_inner()?)?)
        }
    }
}

fn join<I: IntoIterator<Item = D>, D: ToString>(items: I) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn exact_value<T: Scalar>(sys: &EventSystem<T>, target: Target, r: usize) -> T {
    let dist = sys.exact_occurrence();
    match target {
        Target::AtLeast => dist.at_least(r),
        Target::Exactly => dist.exactly(r),
    }
}

/// Whether a gap is nonnegative: exactly in rational mode, up to `tol` in f64.
fn valid<T: Scalar>(gap: &T, tol: f64) -> bool {
    if T::EXACT {
        gap.is_nonnegative()
    } else {
        gap.to_f64() >= -tol
    }
}

#[derive(Serialize)]
struct ExactRow<T> {
    r: usize,
    exactly: T,
    at_least: Option<T>,
}

pub fn exact<T: Scalar>(input: &Path, format: Format) -> Result<String> {
    let sys: EventSystem<T> = load_system(input)?;
    let dist = sys.exact_occurrence();
    let rows: Vec<_> = (0..=sys.n())
        .map(|r| ExactRow { r, exactly: dist.exactly(r), at_least: (r > 0).then(|| dist.at_least(r)) })
        .collect();
    emit(format, &rows, &rows)
}

/// A moment set and the resolved request, plus the system when one was given.
struct Prepared<T> {
    system: Option<EventSystem<T>>,
    set: MomentSet<T>,
    request: BoundRequest,
}

fn default_ell(formula: Option<FormulaId>, width: usize) -> usize {
    match formula {
        Some(FormulaId::Jordan) | Some(FormulaId::Engine) => width,
        Some(f) => f.moments_used().unwrap_or(3),
        None => 3.min(width),
    }
}

fn check_range(n: usize, r: usize, d: usize, ell: usize) -> Result<()> {
    if r > n {
        return Err(Usage(format!("--r {r} exceeds n = {n}")).into());
    }
    if d > n {
        return Err(Usage(format!("--d {d} exceeds n = {n}")).into());
    }
    if ell == 0 || ell > n - d + 1 {
        return Err(Usage(format!("--ell must lie in 1..={} for n = {n}, d = {d}", n - d + 1)).into());
    }
    Ok(())
}

fn request(args: &RequestArgs, ell: usize) -> Result<BoundRequest> {
    if args.m == Some(0) {
        return Err(Usage("--m must be at least 1".into()).into());
    }
    Ok(BoundRequest {
        r: args.r,
        ell,
        target: args.target.into(),
        side: args.side.into(),
        formula: args.formula,
        m: args.m,
    })
}

fn prepare<T: Scalar>(source: &Source, args: &RequestArgs) -> Result<Prepared<T>> {
    if let Some(path) = &source.moments {
        let set: MomentSet<T> = load_moments(path)?;
        if let Some(d) = args.d.filter(|&d| d != set.d()) {
            return Err(Usage(format!("--d {d} does not match the moment file (d = {})", set.d())).into());
        }
        let ell = args.ell.unwrap_or(set.ell());
        check_range(set.n(), args.r, set.d(), ell)?;
        if ell > set.ell() {
            return Err(Usage(format!("--ell {ell} exceeds the {} moments in the file", set.ell())).into());
        }
        let request = request(args, ell)?;
        return Ok(Prepared { system: None, set, request });
    }
    let path = source.input.as_ref().expect("clap requires --input or --moments");
    let system: EventSystem<T> = load_system(path)?;
    let n = system.n();
    let d = args.d.unwrap_or(1);
    let width = (n + 1).saturating_sub(d);
    let ell = args.ell.unwrap_or_else(|| default_ell(args.formula, width));
    check_range(n, args.r, d, ell)?;
    let used = args.formula.and_then(FormulaId::moments_used).unwrap_or(ell).max(ell).min(width);
    let set = MomentSet::from_system(&system, d, used)?;
    let request = request(args, ell)?;
    Ok(Prepared { system: Some(system), set, request })
}

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct BoundDoc<'a, T> {
    certificate: &'a BoundCertificate<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    valid: Option<bool>,
}

#[derive(Serialize)]
struct BoundRow<T> {
    formula: FormulaId,
    side: Side,
    target: Target,
    n: usize,
    r: usize,
    d: usize,
    ell: usize,
    value: T,
    clamped: T,
    m: String,
    exact: Option<T>,
    gap: Option<T>,
    valid: Option<bool>,
}

fn certificate_row<T: Scalar>(cert: &BoundCertificate<T>, exact: Option<T>, tol: f64) -> BoundRow<T> {
    let gap = exact.as_ref().map(|e| cert.gap(e));
    BoundRow {
        formula: cert.formula,
        side: cert.side,
        target: cert.target,
        n: cert.n,
        r: cert.r,
        d: cert.d,
        ell: cert.ell,
        value: cert.value.clone(),
        clamped: cert.clamped.clone(),
        m: join(cert.terms.iter().filter_map(|t| t.m)),
        valid: gap.as_ref().map(|g| valid(g, tol)),
        exact,
        gap,
    }
}

pub fn bound<T: Scalar>(source: &Source, args: &RequestArgs, format: Format, tol: f64) -> Result<String> {
    let p: Prepared<T> = prepare(source, args)?;
    let cert = evaluate(&p.set, &p.request)?;
    let exact = p.system.as_ref().map(|s| exact_value(s, cert.target, cert.r));
    let row = certificate_row(&cert, exact, tol);
    let doc = BoundDoc { certificate: &cert, exact: row.exact.clone(), gap: row.gap.clone(), valid: row.valid };
    emit(format, &doc, &[row])
}

#[derive(Serialize)]
struct SweepRow<T> {
    r: usize,
    d: usize,
    ell: usize,
    side: Side,
    target: Target,
    formula: FormulaId,
    value: T,
    clamped: T,
    exact: T,
    gap: T,
    valid: bool,
}

pub fn sweep<T: Scalar>(input: &Path, format: Format, tol: f64) -> Result<String> {
    let sys: EventSystem<T> = load_system(input)?;
    let n = sys.n();
    let dist = sys.exact_occurrence();
    let mut rows = Vec::new();
    for d in 0..=n {
        let width = n - d + 1;
        let sets: Vec<(usize, MomentSet<T>)> = [2, 3]
            .into_iter()
            .filter(|&ell| ell <= width)
            .map(|ell| Ok((ell, MomentSet::from_system(&sys, d, ell)?)))
            .collect::<Result<_>>()?;
        for r in d..=n {
            for (ell, set) in &sets {
                for side in [Side::Lower, Side::Upper] {
                    for target in [Target::AtLeast, Target::Exactly] {
                        let cert = match evaluate(set, &BoundRequest::best(r, *ell, target, side)) {
                            Ok(cert) => cert,
                            Err(e) if e.is_not_applicable() => continue,
                            Err(e) => return Err(e.into()),
                        };
                        let exact = match target {
                            Target::AtLeast => dist.at_least(r),
                            Target::Exactly => dist.exactly(r),
                        };
                        let gap = cert.gap(&exact);
                        rows.push(SweepRow {
                            r,
                            d,
                            ell: *ell,
                            side,
                            target,
                            formula: cert.formula,
                            valid: valid(&gap, tol),
                            value: cert.value,
                            clamped: cert.clamped,
                            exact,
                            gap,
                        });
                    }
                }
            }
        }
    }
    rows.sort_by_key(|row| (row.r, row.d, row.ell));
    emit(format, &rows, &rows)
}

#[derive(Serialize)]
struct Witness<T> {
    j: Vec<usize>,
    index_set: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    /// The tuple's contribution to the bound.
    value: T,
    /// `Σ_u v_u z*_u`, which equals `value` by construction.
    attained: T,
    nonnegative: bool,
    z: Vec<T>,
    /// A system realizing `z*` for this tuple, when `z*` is nonnegative.
    #[serde(skip_serializing_if = "Option::is_none")]
    distribution: Option<Value>,
}

#[derive(Serialize)]
struct WitnessRow<T> {
    j: String,
    index_set: String,
    m: Option<usize>,
    value: T,
    attained: T,
    nonnegative: bool,
    z: String,
}

pub fn witness<T: Scalar>(source: &Source, args: &RequestArgs, format: Format) -> Result<String> {
    let p: Prepared<T> = prepare(source, args)?;
    let cert = evaluate(&p.set, &p.request)?;
    let (n, d) = (cert.n, cert.d);
    let f = sharpbounds_core::MomentMatrix::<T>::new(n, d, cert.ell)?;
    let v = TargetVector::new(cert.target, n, cert.r, d)?;
    let mut witnesses = Vec::with_capacity(cert.terms.len());
    for term in &cert.terms {
        let vector = p.set.vectors().iter().find(|v| v.j == term.j).expect("certificate tuples come from the set");
        let i = IndexSet::new(term.index_set.clone(), f.width())?;
        let w = sharpness_witness(&f, &i, &vector.values[..cert.ell])?;
        let attained: T = w.z.iter().zip(v.bits()).filter(|(_, b)| **b).map(|(z, _)| z.clone()).sum();
        let distribution = match w.nonnegative {
            true => Some(system_to_json(&induced_system(&w, n, &term.j)?)),
            false => None,
        };
        witnesses.push(Witness {
            j: term.j.indices().to_vec(),
            index_set: term.index_set.clone(),
            m: term.m,
            value: term.value.clone(),
            attained,
            nonnegative: w.nonnegative,
            z: w.z,
            distribution,
        });
    }
    let rows: Vec<_> = witnesses
        .iter()
        .map(|w| WitnessRow {
            j: join(&w.j),
            index_set: join(&w.index_set),
            m: w.m,
            value: w.value.clone(),
            attained: w.attained.clone(),
            nonnegative: w.nonnegative,
            z: join(&w.z),
        })
        .collect();
    emit(format, &json!({ "certificate": cert, "witnesses": witnesses }), &rows)
}

#[derive(Serialize)]
struct ConditionalRow<T> {
    kind: &'static str,
    block: Option<usize>,
    weight: Option<T>,
    formula: Option<FormulaId>,
    value: T,
    clamped: T,
    exact: T,
    valid: bool,
}

pub fn conditional<T: Scalar>(
    input: &Path,
    partition: &Path,
    args: &RequestArgs,
    format: Format,
    tol: f64,
) -> Result<String> {
    let sys: EventSystem<T> = load_system(input)?;
    let n = sys.n();
    let part = parse_partition(&read(partition)?, n).with_context(|| partition.display().to_string())?;
    let d = args.d.unwrap_or(1);
    let ell = args.ell.unwrap_or_else(|| default_ell(args.formula, (n + 1).saturating_sub(d)));
    check_range(n, args.r, d, ell)?;
    let req = request(args, ell)?;
    let report = conditional_report(&sys, &part, d, &req)?;
    let (target, r, side) = (report.target, report.r, report.side);
    let blocks = conditional_systems(&sys, &part)?;
    let gap_ok = |bound: &T, exact: &T| {
        let gap = match side {
            Side::Upper => bound.clone() - exact.clone(),
            Side::Lower => exact.clone() - bound.clone(),
        };
        valid(&gap, tol)
    };
    let mut rows = Vec::new();
    let mut block_exact = Vec::new();
    for (bc, cb) in report.blocks.iter().zip(&blocks) {
        debug_assert_eq!(bc.block, cb.block);
        let exact = exact_value(&cb.system, target, r);
        block_exact.push(json!({ "block": cb.block, "exact": exact }));
        rows.push(ConditionalRow {
            kind: "block",
            block: Some(bc.block),
            weight: Some(bc.weight.clone()),
            formula: Some(bc.certificate.formula),
            value: bc.certificate.value.clone(),
            clamped: bc.certificate.clamped.clone(),
            valid: gap_ok(&bc.certificate.clamped, &exact),
            exact,
        });
    }
    let exact = exact_value(&sys, target, r);
    rows.push(ConditionalRow {
        kind: "aggregate",
        block: None,
        weight: None,
        formula: None,
        value: report.value.clone(),
        clamped: report.clamped.clone(),
        exact: exact.clone(),
        valid: gap_ok(&report.clamped, &exact),
    });
    if let Some(u) = &report.unconditional {
        rows.push(ConditionalRow {
            kind: "unconditional",
            block: None,
            weight: None,
            formula: Some(u.formula),
            value: u.value.clone(),
            clamped: u.clamped.clone(),
            exact: exact.clone(),
            valid: gap_ok(&u.clamped, &exact),
        });
    }
    let doc = json!({
        "aggregate": report,
        "exact": exact,
        "strictly_improves": report.strictly_improves(),
        "block_exact": block_exact,
    });
    emit(format, &doc, &rows)
}

#[derive(Serialize)]
struct VerifyRow {
    suite: Suite,
    checks: u64,
    failures: u64,
    observed: u64,
    passed: bool,
}

pub struct VerifyArgs {
    pub trials: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    pub suites: Vec<Suite>,
    pub mutation: Option<MutationArg>,
}

/// Runs the suites; returns the rendered output, the plain-text summary and
/// whether everything passed.
pub fn verify(args: VerifyArgs, format: Format) -> Result<(String, String, bool)> {
    if args.n_min < 1 || args.n_min > args.n_max || args.n_max > 12 {
        return Err(Usage("need 1 <= --n-min <= --n-max <= 12".into()).into());
    }
    let config = VerifyConfig {
        trials: args.trials,
        n_min: args.n_min,
        n_max: args.n_max,
        seed: args.seed,
        suites: if args.suites.is_empty() { Suite::ALL.to_vec() } else { args.suites },
        mutation: args.mutation.map(|m| match m {
            MutationArg::U1OffByOne => Mutation::U1OffByOne,
        }),
    };
    let report: VerifyReport = verify::run(&config);
    let rows: Vec<_> = report
        .suites
        .iter()
        .map(|s| VerifyRow { suite: s.suite, checks: s.checks, failures: s.failures, observed: s.observed, passed: s.passed() })
        .collect();
    Ok((emit(format, &report, &rows)?, report.render(), report.passed()))
}

/// Exit status for an error: usage 2, parse 3, not applicable 4, other 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parse(_) => 3,
                Error::NotApplicable(_) => 4,
                Error::Argument(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use sharpbounds_core::Rational;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(exit_code(&anyhow::Error::new(Usage("x".into()))), 2);
        assert_eq!(exit_code(&anyhow::Error::new(Error::Parse("x".into())).context("file")), 3);
        assert_eq!(exit_code(&anyhow::Error::new(Error::NotApplicable("x".into()))), 4);
        assert_eq!(exit_code(&anyhow::Error::new(Error::DegenerateMeasure("x".into()))), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 1);
    }

    #[test]
    fn validity_uses_the_tolerance_only_for_floats() {
        assert!(valid(&-1e-10f64, 1e-9));
        assert!(!valid(&-1e-8f64, 1e-9));
        assert!(!valid(&Rational::new(-1, 10_000_000_000), 1e-9));
        assert!(valid(&Rational::new(0, 1), 0.0));
    }

    #[test]
    fn default_moment_counts() {
        assert_eq!(default_ell(None, 5), 3);
        assert_eq!(default_ell(None, 2), 2);
        assert_eq!(default_ell(Some(FormulaId::U1), 5), 2);
        assert_eq!(default_ell(Some(FormulaId::Jordan), 5), 5);
    }

    #[test]
    fn csv_output_has_a_header() {
        let rows = [ExactRow { r: 0, exactly: 0.5, at_least: None }, ExactRow { r: 1, exactly: 0.5, at_least: Some(0.5) }];
        assert_eq!(emit(Format::Csv, &rows, &rows).unwrap(), "r,exactly,at_least\n0,0.5,\n1,0.5,0.5\n");
    }
}
