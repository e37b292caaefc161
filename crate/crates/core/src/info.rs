//! Entropy, KL divergence and total variation, in bits.

/// −Σ p log₂ p over positive entries.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// Σ p log₂(p/q). Infinite if q = 0 where p > 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| if y > 0.0 { x * (x / y).log2() } else { f64::INFINITY })
        .sum()
}

/// ½ Σ |p − q|.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
