//! Deterministic workloads shared by the benchmarks.

use sharpbounds_core::{EventSystem, Rational};

/// `n` exchangeable-looking events with a fixed, irregular integer weighting.
pub fn skewed_system(n: usize) -> EventSystem<Rational> {
    let atoms = (0..1u64 << n).map(|mask| {
        let w = (mask.count_ones() as i64 * 7 + (mask % 5) as i64 + 1) % 11;
        (mask, Rational::new(w, 1))
    });
    EventSystem::normalize(n, atoms).expect("nonzero weights")
}

pub fn skewed_system_f64(n: usize) -> EventSystem<f64> {
    let atoms = (0..1u64 << n).map(|mask| {
        let w = (mask.count_ones() as i64 * 7 + (mask % 5) as i64 + 1) % 11;
        (mask, w as f64)
    });
    EventSystem::normalize(n, atoms).expect("nonzero weights")
}
