//! Probability and calculus helpers shared by the rest of the crate.

use std::ops::Deref;

use crate::{Error, Result};

/// Floor applied inside every logarithm.
pub const EPS: f64 = 1e-12;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// A probability vector produced by [`softmax`]: components in `[0, 1]`
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates an externally supplied distribution.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty probability vector"));
        }
        if values.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::invalid("probability outside [0, 1]"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities sum to {sum}")));
        }
        Ok(ProbVector(values))
    }

    pub fn uniform(c: usize) -> Self {
        ProbVector(vec![1.0 / c as f64; c])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Unconstrained logits; all components finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite logit at component {j}")));
        }
        Ok(LogitVector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LogitVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Result<ProbVector> {
    if z.len() < 2 {
        return Err(Error::invalid("softmax needs at least two logits"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite logit"));
    }
    let mut out = vec![0.0; z.len()];
    softmax_into(z, &mut out);
    Ok(ProbVector(out))
}

/// Unchecked softmax for hot loops; `z` must be finite.
pub fn softmax_into(z: &[f64], out: &mut [f64]) {
    debug_assert_eq!(z.len(), out.len());
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(max(p, EPS))`; rejects negative inputs.
pub fn clamped_log(p: f64) -> Result<f64> {
    if p < 0.0 || p.is_nan() {
        return Err(Error::invalid(format!("log of negative value {p}")));
    }
    Ok(ln_clamped(p))
}

#[inline]
pub(crate) fn ln_clamped(p: f64) -> f64 {
    p.max(EPS).ln()
}

/// Shannon entropy in nats; zero-probability components contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&q| q * ln_clamped(q)).sum::<f64>()
}

/// Central-difference gradient of `f` at `z`.
pub fn finite_diff_grad<F>(f: F, z: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut probe = z.to_vec();
    let mut grad = Vec::with_capacity(z.len());
    for j in 0..z.len() {
        probe[j] = z[j] + h;
        let up = f(&probe);
        probe[j] = z[j] - h;
        let down = f(&probe);
        probe[j] = z[j];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::OracleFailure(format!(
                "non-finite function value around component {j}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax_tiebreak(v: &[f64]) -> Result<usize> {
    if v.is_empty() {
        return Err(Error::invalid("argmax of empty sequence"));
    }
    Ok(argmax(v))
}

#[inline]
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = j;
        }
    }
    best
}
