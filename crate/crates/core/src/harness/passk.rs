use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("pass@k undefined for r={samples}, c={correct}, k={k}: need 0 <= c <= r and 1 <= k <= r")]
pub struct DomainError {
    pub samples: u64,
    pub correct: u64,
    pub k: u64,
}

/// Probability that at least one of `k` draws without replacement from `r`
/// samples (of which `c` are correct) is correct:
/// `1 - C(r-c, k) / C(r, k)`, evaluated as a running product.
pub fn pass_at_k(samples: u64, correct: u64, k: u64) -> Result<f64, DomainError> {
    if correct > samples || k == 0 || k > samples {
        return Err(DomainError { samples, correct, k });
    }
    if samples - correct < k {
        return Ok(1.0);
    }
    // C(r-c, k) / C(r, k) = prod_{i=r-c+1}^{r} (1 - k/i)
    let miss: f64 = (samples - correct + 1..=samples)
        .map(|i| 1.0 - k as f64 / i as f64)
        .product();
    Ok(1.0 - miss)
}
