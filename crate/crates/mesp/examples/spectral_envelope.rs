//! The spectral core at a glance: critical index, water-filling, the
//! envelope value, and its canonical subgradient.
//!
//! Run with: `cargo run --release --example spectral_envelope`

use mesp::spectral::{
    critical_index, envelope_subgradient, envelope_value, majorizes, tail_mean_spectrum, waterfill,
    PhiKind,
};
use nalgebra::DVector;

fn main() {
    let lambda = [10.0, 1.0, 1.0, 1.0, 1.0];
    let s = 2;
    println!("spectrum: {lambda:?}, truncation s = {s}");

    let crit = critical_index(&lambda, s).unwrap();
    println!(
        "critical index k = {}, tail mean = {}",
        crit.k, crit.tail_mean
    );

    let filled = waterfill(&lambda, s).unwrap();
    println!("water-filled spectrum: {:?}", filled.as_slice());
    let maj = majorizes(&filled, &DVector::from_row_slice(&lambda)).unwrap();
    println!("water-filled majorizes the input: {maj}");

    for phi in [PhiKind::NegLog, PhiKind::Inv] {
        let value = envelope_value(&lambda, s, phi).unwrap();
        println!("envelope value ({phi:?}): {value:+.6}");
    }

    let beta = tail_mean_spectrum(&lambda, s).unwrap();
    let mu = envelope_subgradient(&lambda, s, PhiKind::NegLog).unwrap();
    println!("tail-flattened spectrum: {:?}", beta.as_slice());
    println!("canonical subgradient:   {:?}", mu.as_slice());

    // Ordinary scaling shifts the log-det envelope by exactly -s ln(gamma),
    // so the relaxation built on it is scaling invariant.
    let gamma = 3.0;
    let scaled: Vec<f64> = lambda.iter().map(|v| gamma * v).collect();
    let lhs = envelope_value(&scaled, s, PhiKind::NegLog).unwrap();
    let rhs = envelope_value(&lambda, s, PhiKind::NegLog).unwrap() - s as f64 * gamma.ln();
    println!("o-scaling shift check: {lhs:+.12} vs {rhs:+.12}");
}
