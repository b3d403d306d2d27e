//! Bounds conditional on a finite partition of the atom space, and their
//! expectation over the blocks.

use serde::{Deserialize, Serialize};

use crate::bounds::{evaluate, BoundCertificate, BoundRequest};
use crate::engine::{Side, Target};
use crate::error::{arg, Error, Result};
use crate::moments::MomentSet;
use crate::scalar::Scalar;
use crate::system::EventSystem;

/// A partition of `0..2^n` into blocks of atom masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionField {
    n: usize,
    blocks: Vec<Vec<u64>>,
}

impl PartitionField {
    pub fn new(n: usize, blocks: Vec<Vec<u64>>) -> Result<Self> {
        if n == 0 || n > crate::system::MAX_EVENTS {
            return Err(arg(format!("n={n} outside 1..={}", crate::system::MAX_EVENTS)));
        }
        let size = 1usize << n;
        let mut owner = vec![None; size];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(arg(format!("block {b} is empty")));
            }
            for &mask in block {
                let slot = owner
                    .get_mut(mask as usize)
                    .ok_or_else(|| arg(format!("block {b}: mask {mask} outside 0..{size}")))?;
                if let Some(prev) = slot.replace(b) {
                    return Err(arg(format!("mask {mask} appears in blocks {prev} and {b}")));
                }
            }
        }
        if let Some(missing) = owner.iter().position(Option::is_none) {
            return Err(arg(format!("mask {missing} is not covered by any block")));
        }
        Ok(PartitionField { n, blocks })
    }

    /// The single block `Ω`.
    pub fn trivial(n: usize) -> Result<Self> {
        Self::new(n, vec![(0..1u64 << n).collect()])
    }

    /// One block per atom.
    pub fn atoms(n: usize) -> Result<Self> {
        Self::new(n, (0..1u64 << n).map(|m| vec![m]).collect())
    }

    /// Two blocks: atoms inside `A_k`, then atoms outside it.
    pub fn by_event(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(arg(format!("event {k} outside 1..={n}")));
        }
        let (inside, outside): (Vec<u64>, Vec<u64>) = (0..1u64 << n).partition(|m| m >> (k - 1) & 1 == 1);
        Self::new(n, vec![inside, outside])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<u64>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn check(&self, sys: &EventSystem<impl Scalar>) -> Result<()> {
        if sys.n() != self.n {
            return Err(arg(format!("partition is over n={}, system has n={}", self.n, sys.n())));
        }
        Ok(())
    }
}

/// A positive-weight block with its conditional system.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalBlock<T> {
    pub block: usize,
    pub weight: T,
    pub system: EventSystem<T>,
}

/// Conditional systems for every positive-weight block, in block order.
pub fn conditional_systems<T: Scalar>(sys: &EventSystem<T>, partition: &PartitionField) -> Result<Vec<ConditionalBlock<T>>> {
    partition.check(sys)?;
    let mut out = Vec::new();
    for (b, atoms) in partition.blocks().iter().enumerate() {
        let weight: T = atoms.iter().map(|&m| sys.weight(m).clone()).sum();
        if !weight.is_positive() {
            continue;
        }
        out.push(ConditionalBlock { block: b, weight, system: sys.restrict(atoms)? });
    }
    if out.is_empty() {
        return Err(Error::DegenerateMeasure("no block carries positive weight".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockMoments<T> {
    pub block: usize,
    pub weight: T,
    pub moments: MomentSet<T>,
}

/// Moments of each block-normalized measure; zero-weight blocks are skipped.
pub fn conditional_moments<T: Scalar>(
    sys: &EventSystem<T>,
    partition: &PartitionField,
    d: usize,
    ell: usize,
) -> Result<Vec<BlockMoments<T>>> {
    conditional_systems(sys, partition)?
        .into_iter()
        .map(|cb| Ok(BlockMoments { block: cb.block, weight: cb.weight, moments: MomentSet::from_system(&cb.system, d, ell)? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct BlockCertificate<T> {
    pub block: usize,
    pub weight: T,
    pub certificate: BoundCertificate<T>,
}

/// Evaluates `request` on every positive-weight block, with `m` chosen per
/// block and tuple.
pub fn conditional_bound<T: Scalar>(
    sys: &EventSystem<T>,
    partition: &PartitionField,
    d: usize,
    request: &BoundRequest,
) -> Result<Vec<BlockCertificate<T>>> {
    let ell = request.formula.and_then(|f| f.moments_used()).unwrap_or(request.ell);
    conditional_moments(sys, partition, d, ell)?
        .into_iter()
        .map(|bm| {
            Ok(BlockCertificate { block: bm.block, weight: bm.weight, certificate: evaluate(&bm.moments, request)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct AggregatedBound<T> {
    pub side: Side,
    pub target: Target,
    pub r: usize,
    pub d: usize,
    /// `Σ_b P(b) · raw_b`.
    pub value: T,
    /// `Σ_b P(b) · clamped_b`, itself within `[0, 1]`.
    pub clamped: T,
    pub blocks: Vec<BlockCertificate<T>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unconditional: Option<BoundCertificate<T>>,
    /// How much tighter the aggregate is than `unconditional` (clamped values;
    /// negative when looser).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub improvement: Option<T>,
}

impl<T: Scalar> AggregatedBound<T> {
    pub fn brackets(&self, exact: &T) -> bool {
        match self.side {
            Side::Upper => self.clamped.approx_ge(exact),
            Side::Lower => self.clamped.approx_le(exact),
        }
    }

    pub fn strictly_improves(&self) -> bool {
        self.improvement.as_ref().is_some_and(|i| i.is_positive())
    }
}

/// Weight-averages per-block certificates into an unconditional bound and
/// compares it with `unconditional` when given.
pub fn expectation_aggregate<T: Scalar>(
    blocks: Vec<BlockCertificate<T>>,
    unconditional: Option<BoundCertificate<T>>,
) -> Result<AggregatedBound<T>> {
    let first = blocks.first().ok_or_else(|| arg("no block certificates to aggregate"))?;
    let (side, target, r, d) = (first.certificate.side, first.certificate.target, first.certificate.r, first.certificate.d);
    if blocks.iter().any(|b| b.certificate.side != side || b.certificate.target != target || b.certificate.r != r) {
        return Err(arg("block certificates mix sides, targets or r"));
    }
    let total: T = blocks.iter().map(|b| b.weight.clone()).sum();
    let value: T = blocks.iter().map(|b| b.weight.clone() * b.certificate.value.clone()).sum::<T>() / total.clone();
    let clamped: T = blocks.iter().map(|b| b.weight.clone() * b.certificate.clamped.clone()).sum::<T>() / total;
    let improvement = match &unconditional {
        Some(u) if u.side != side || u.target != target => {
            return Err(arg("unconditional certificate has a different side or target"));
        }
        Some(u) => Some(match side {
            Side::Upper => u.clamped.clone() - clamped.clone(),
            Side::Lower => clamped.clone() - u.clamped.clone(),
        }),
        None => None,
    };
    Ok(AggregatedBound { side, target, r, d, value, clamped, blocks, unconditional, improvement })
}

/// Per-block certificates, their aggregate, and the same request evaluated
/// unconditionally for comparison.
pub fn conditional_report<T: Scalar>(
    sys: &EventSystem<T>,
    partition: &PartitionField,
    d: usize,
    request: &BoundRequest,
) -> Result<AggregatedBound<T>> {
    let blocks = conditional_bound(sys, partition, d, request)?;
    let ell = request.formula.and_then(|f| f.moments_used()).unwrap_or(request.ell);
    let unconditional = evaluate(&MomentSet::from_system(sys, d, ell)?, request)?;
    expectation_aggregate(blocks, Some(unconditional))
}
