//! Shared test support: straightforward scalar re-derivations of every
//! model formula, random small instances, and suites that measure how far
//! the library strays from them.
//!
//! Oracles work on plain `Vec<Vec<f64>>` with explicit loops and never call
//! into the tape.

pub mod bench;
pub mod oracle;
pub mod random;
pub mod suites;

/// `|actual − expected| / |expected|`, with exact zeros compared absolutely.
pub fn rel_err(actual: f64, expected: f64) -> f64 {
    let diff = (actual - expected).abs();
    if expected == 0.0 {
        diff
    } else {
        diff / expected.abs()
    }
}

/// Largest [`rel_err`] over matching entries.
pub fn max_rel_err(actual: &[Vec<f64>], expected: &[Vec<f64>]) -> f64 {
    assert_eq!(actual.len(), expected.len(), "row count");
    actual
        .iter()
        .zip(expected)
        .flat_map(|(a, e)| {
            assert_eq!(a.len(), e.len(), "row width");
            a.iter().zip(e).map(|(x, y)| rel_err(*x, *y))
        })
        .fold(0.0, f64::max)
}
