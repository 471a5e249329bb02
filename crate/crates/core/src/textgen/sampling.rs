use rand::Rng;
use thiserror::Error;

/// Below this temperature sampling degenerates to argmax with lowest-index
/// tie-breaking.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("no weights to sample from")]
    EmptyWeights,
    #[error("weight {index} is not a positive finite number")]
    NonPositiveWeight { index: usize },
    #[error("temperature must be a positive finite number")]
    NonPositiveTemperature,
}

fn validate(weights: &[f64], temperature: f64) -> Result<(), SamplingError> {
    if weights.is_empty() {
        return Err(SamplingError::EmptyWeights);
    }
    if let Some(index) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(SamplingError::NonPositiveWeight { index });
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(SamplingError::NonPositiveTemperature);
    }
    Ok(())
}

fn argmax(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[best] {
            best = i;
        }
    }
    best
}

/// `p_i = w_i^(1/T) / sum_j w_j^(1/T)`, computed in log space.
pub fn temperature_distribution(weights: &[f64], temperature: f64) -> Result<Vec<f64>, SamplingError> {
    validate(weights, temperature)?;
    if temperature < GREEDY_TEMPERATURE {
        let mut p = vec![0.0; weights.len()];
        p[argmax(weights)] = 1.0;
        return Ok(p);
    }
    let logits: Vec<f64> = weights.iter().map(|w| w.ln() / temperature).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|u| u / total).collect())
}

pub fn temperature_sample<R: Rng + ?Sized>(
    weights: &[f64],
    temperature: f64,
    rng: &mut R,
) -> Result<usize, SamplingError> {
    let p = temperature_distribution(weights, temperature)?;
    if temperature < GREEDY_TEMPERATURE {
        return Ok(argmax(weights));
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return Ok(i);
        }
    }
    // Rounding left `acc` a hair under 1.
    Ok(p.iter().rposition(|pi| *pi > 0.0).unwrap_or(0))
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.ln()).sum()
}
