//! Loss terms of the joint objective and their closed-form gradients.
//!
//! For one example with network prediction `f = softmax(z)`, label
//! distribution `y_d = softmax(y_logits)` and observed class `ŷ`:
//!
//! ```text
//! L = (1/c) L_c(f, y_d) + alpha L_o(ŷ, y_d) + (beta/c) L_e(f)
//! ```
//!
//! `L_c` is a KL divergence in either direction, `L_o` is the cross entropy
//! between `ŷ` and `y_d`, and `L_e` is the entropy of `f`. Batch losses are
//! means over the batch, so per-example gradients returned by
//! [`evaluate_bundle`] carry a `1/B` factor.
//!
//! Softmax variants differentiate through the softmax Jacobian
//! `∂p_k/∂z_j = p_k (δ_kj − p_j)`: for a per-component partial `a_k = ∂L/∂p_k`
//! the logit gradient is `p_j a_j − p_j Σ_k p_k a_k`. The binary variant treats
//! every class as an independent Bernoulli whose probabilities come from a
//! sigmoid of the corresponding logit.

use serde::{Deserialize, Serialize};

use crate::labelbank::NoisyLabel;
use crate::numerics::{entropy, ln_clamped, EPS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// `KL(y_d || f)`.
    KlForward,
    /// `KL(f || y_d)`.
    KlInverse,
    /// Sum of per-class Bernoulli `KL(f_j || y_d_j)`; `f` and `y_d` are sigmoid outputs.
    BinaryInverse,
}

impl LossVariant {
    pub fn name(self) -> &'static str {
        match self {
            LossVariant::KlForward => "kl_forward",
            LossVariant::KlInverse => "kl_inverse",
            LossVariant::BinaryInverse => "binary_inverse",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "kl_forward" | "kl-forward" | "forward" => Some(LossVariant::KlForward),
            "kl_inverse" | "kl-inverse" | "inverse" => Some(LossVariant::KlInverse),
            "binary_inverse" | "binary-inverse" => Some(LossVariant::BinaryInverse),
            _ => None,
        }
    }

    /// Whether predictions and label distributions are sigmoid outputs.
    pub fn is_binary(self) -> bool {
        matches!(self, LossVariant::BinaryInverse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
}

impl Hyperparams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let hp = Hyperparams { alpha, beta };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Batch loss values and per-example gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBundle {
    pub total: f64,
    pub classification: f64,
    pub compatibility: f64,
    pub entropy_term: f64,
    /// `∂L/∂y_logits` per example, including the `1/B` batch factor.
    pub grad_label_logits: Vec<Vec<f64>>,
    /// `∂L/∂z` per example, including the `1/B` batch factor.
    pub grad_net_logits: Vec<Vec<f64>>,
}

/// `KL(p || q) = Σ p log(p/q)` with both logs clamped.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| a * (ln_clamped(a) - ln_clamped(b)))
        .sum()
}

#[inline]
fn clamp_open(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Sum over classes of Bernoulli `KL(f_j || y_d_j)`.
pub fn binary_inverse_kl(f: &[f64], yd: &[f64]) -> f64 {
    f.iter()
        .zip(yd)
        .map(|(&a, &b)| {
            let (a, b) = (clamp_open(a), clamp_open(b));
            a * (a.ln() - b.ln()) + (1.0 - a) * ((1.0 - a).ln() - (1.0 - b).ln())
        })
        .sum()
}

fn binary_cross_entropy(target: usize, yd: &[f64]) -> f64 {
    yd.iter()
        .enumerate()
        .map(|(j, &y)| {
            let y = clamp_open(y);
            if j == target {
                -y.ln()
            } else {
                -(1.0 - y).ln()
            }
        })
        .sum()
}

fn binary_entropy(f: &[f64]) -> f64 {
    f.iter()
        .map(|&p| {
            let p = clamp_open(p);
            -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
        })
        .sum()
}

fn check_batch<T: AsRef<[f64]>>(batch: &[T]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

/// Batch-mean cross entropy `−log f[ŷ]`.
pub fn cross_entropy_loss<T: AsRef<[f64]>>(f_batch: &[T], labels: &[NoisyLabel]) -> Result<f64> {
    check_batch(f_batch)?;
    check_len(f_batch.len(), labels.len())?;
    let sum: f64 = f_batch
        .iter()
        .zip(labels)
        .map(|(f, l)| -ln_clamped(f.as_ref()[l.class()]))
        .sum();
    Ok(sum / f_batch.len() as f64)
}

fn per_example_classification(f: &[f64], yd: &[f64], variant: LossVariant) -> f64 {
    match variant {
        LossVariant::KlForward => kl_divergence(yd, f),
        LossVariant::KlInverse => kl_divergence(f, yd),
        LossVariant::BinaryInverse => binary_inverse_kl(f, yd),
    }
}

/// Batch-mean classification loss.
pub fn classification_loss<T: AsRef<[f64]>, U: AsRef<[f64]>>(
    f_batch: &[T],
    yd_batch: &[U],
    variant: LossVariant,
) -> Result<f64> {
    check_batch(f_batch)?;
    check_len(f_batch.len(), yd_batch.len())?;
    let sum: f64 = f_batch
        .iter()
        .zip(yd_batch)
        .map(|(f, y)| per_example_classification(f.as_ref(), y.as_ref(), variant))
        .sum();
    Ok(sum / f_batch.len() as f64)
}

/// Batch-mean cross entropy between the noisy labels and the label distributions.
pub fn compatibility_loss<T: AsRef<[f64]>>(yd_batch: &[T], labels: &[NoisyLabel]) -> Result<f64> {
    cross_entropy_loss(yd_batch, labels)
}

/// Batch-mean entropy of the predictions.
pub fn entropy_loss<T: AsRef<[f64]>>(f_batch: &[T]) -> Result<f64> {
    check_batch(f_batch)?;
    Ok(f_batch.iter().map(|f| entropy(f.as_ref())).sum::<f64>() / f_batch.len() as f64)
}

/// `∂L_c/∂y_logits` for one example, without the `1/c` weight.
///
/// Forward KL gives `y_d_j (log(y_d_j/f_j) − L_c)`; inverse KL gives
/// `y_d_j − f_j`. Both sum to zero over `j` for the softmax variants.
pub fn classification_label_grad(f: &[f64], yd: &[f64], variant: LossVariant) -> Vec<f64> {
    match variant {
        LossVariant::KlForward => {
            let lc = kl_divergence(yd, f);
            yd.iter()
                .zip(f)
                .map(|(&y, &p)| y * (ln_clamped(y) - ln_clamped(p) - lc))
                .collect()
        }
        LossVariant::KlInverse => yd.iter().zip(f).map(|(&y, &p)| y - p).collect(),
        // the sigmoid derivative y(1-y) cancels the Bernoulli partials exactly
        LossVariant::BinaryInverse => yd
            .iter()
            .zip(f)
            .map(|(&y, &p)| clamp_open(y) - clamp_open(p))
            .collect(),
    }
}

/// Label-logit gradient of `(1/c) L_c + alpha L_o` for one example.
pub fn grad_label_logits(
    f: &[f64],
    yd: &[f64],
    noisy: NoisyLabel,
    variant: LossVariant,
    alpha: f64,
    c: usize,
) -> Vec<f64> {
    let inv_c = 1.0 / c as f64;
    let target = noisy.class();
    classification_label_grad(f, yd, variant)
        .into_iter()
        .zip(yd)
        .enumerate()
        .map(|(j, (g, &y))| {
            let y = if variant.is_binary() { clamp_open(y) } else { y };
            let onehot = if j == target { 1.0 } else { 0.0 };
            inv_c * g + alpha * (y - onehot)
        })
        .collect()
}

/// Network-logit gradient of `(1/c) L_c + (beta/c) L_e` for one example.
pub fn grad_net_logits(f: &[f64], yd: &[f64], variant: LossVariant, beta: f64, c: usize) -> Vec<f64> {
    let inv_c = 1.0 / c as f64;
    match variant {
        LossVariant::KlForward | LossVariant::KlInverse => {
            let h = entropy(f);
            let lc = if variant == LossVariant::KlInverse {
                kl_divergence(f, yd)
            } else {
                0.0
            };
            f.iter()
                .zip(yd)
                .map(|(&p, &y)| {
                    let cls = match variant {
                        LossVariant::KlForward => p - y,
                        _ => p * (ln_clamped(p) - ln_clamped(y) - lc),
                    };
                    let ent = -p * (ln_clamped(p) + h);
                    inv_c * cls + beta * inv_c * ent
                })
                .collect()
        }
        LossVariant::BinaryInverse => f
            .iter()
            .zip(yd)
            .map(|(&p, &y)| {
                let (p, y) = (clamp_open(p), clamp_open(y));
                let slope = p * (1.0 - p);
                let logit_p = p.ln() - (1.0 - p).ln();
                let logit_y = y.ln() - (1.0 - y).ln();
                inv_c * slope * (logit_p - logit_y) - beta * inv_c * slope * logit_p
            })
            .collect(),
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("batch length mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Evaluates every loss term on a batch together with per-example gradients.
pub fn evaluate_bundle<T: AsRef<[f64]>, U: AsRef<[f64]>>(
    f_batch: &[T],
    yd_batch: &[U],
    labels: &[NoisyLabel],
    variant: LossVariant,
    hp: Hyperparams,
    c: usize,
) -> Result<LossBundle> {
    check_batch(f_batch)?;
    check_len(f_batch.len(), yd_batch.len())?;
    check_len(f_batch.len(), labels.len())?;
    hp.validate()?;
    for (i, (f, y)) in f_batch.iter().zip(yd_batch).enumerate() {
        let (f, y) = (f.as_ref(), y.as_ref());
        if f.len() != c || y.len() != c {
            return Err(Error::invalid(format!("example {i} does not have {c} classes")));
        }
        if f.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("example {i} has non-finite probabilities")));
        }
        if labels[i].class() >= c {
            return Err(Error::invalid(format!("example {i} has class {} >= {c}", labels[i].0)));
        }
    }

    let b = f_batch.len() as f64;
    let inv_c = 1.0 / c as f64;
    let (mut cls, mut compat, mut ent) = (0.0, 0.0, 0.0);
    let mut grad_label = Vec::with_capacity(f_batch.len());
    let mut grad_net = Vec::with_capacity(f_batch.len());
    for ((f, y), &l) in f_batch.iter().zip(yd_batch).zip(labels) {
        let (f, y) = (f.as_ref(), y.as_ref());
        cls += per_example_classification(f, y, variant);
        if variant.is_binary() {
            compat += binary_cross_entropy(l.class(), y);
            ent += binary_entropy(f);
        } else {
            compat += -ln_clamped(y[l.class()]);
            ent += entropy(f);
        }
        let mut gl = grad_label_logits(f, y, l, variant, hp.alpha, c);
        gl.iter_mut().for_each(|g| *g /= b);
        let mut gn = grad_net_logits(f, y, variant, hp.beta, c);
        gn.iter_mut().for_each(|g| *g /= b);
        grad_label.push(gl);
        grad_net.push(gn);
    }
    let (cls, compat, ent) = (cls / b, compat / b, ent / b);
    Ok(LossBundle {
        total: inv_c * cls + hp.alpha * compat + hp.beta * inv_c * ent,
        classification: cls,
        compatibility: compat,
        entropy_term: ent,
        grad_label_logits: grad_label,
        grad_net_logits: grad_net,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, sigmoid, softmax, FD_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Naive per-example objectives written out directly, used as the
    // function the finite-difference oracle differentiates.
    fn naive_softmax(z: &[f64]) -> Vec<f64> {
        let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    fn naive_kl(p: &[f64], q: &[f64]) -> f64 {
        p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
    }

    fn naive_label_objective(z_label: &[f64], f: &[f64], noisy: usize, v: LossVariant, alpha: f64) -> f64 {
        let c = f.len() as f64;
        let y = naive_softmax(z_label);
        let lc = match v {
            LossVariant::KlForward => naive_kl(&y, f),
            _ => naive_kl(f, &y),
        };
        lc / c - alpha * y[noisy].ln()
    }

    fn naive_net_objective(z: &[f64], yd: &[f64], v: LossVariant, beta: f64) -> f64 {
        let c = yd.len() as f64;
        let f = naive_softmax(z);
        let lc = match v {
            LossVariant::KlForward => naive_kl(yd, &f),
            _ => naive_kl(&f, yd),
        };
        let h: f64 = -f.iter().map(|p| p * p.ln()).sum::<f64>();
        lc / c + beta / c * h
    }

    fn random_logits(rng: &mut ChaCha8Rng, c: usize, scale: f64) -> Vec<f64> {
        (0..c).map(|_| rng.random_range(-scale..scale)).collect()
    }

    fn assert_close(a: &[f64], b: &[f64], rel: f64, abs: f64) {
        for (x, y) in a.iter().zip(b) {
            let ok = (x - y).abs() <= abs || (x - y).abs() <= rel * y.abs().max(x.abs());
            assert!(ok, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let l = [NoisyLabel(0), NoisyLabel(1)];
        assert_eq!(cross_entropy_loss(&[vec![1.0, 0.0], vec![0.0, 1.0]], &l).unwrap(), 0.0);
        let v = cross_entropy_loss(&[vec![0.25; 4]], &[NoisyLabel(3)]).unwrap();
        assert!((v - 1.38629).abs() < 1e-5);
        let v = cross_entropy_loss(&[vec![0.0, 1.0]], &[NoisyLabel(0)]).unwrap();
        assert!((v - 27.631).abs() < 1e-3);
        assert!(cross_entropy_loss::<Vec<f64>>(&[], &[]).is_err());
    }

    #[test]
    fn classification_examples() {
        let same = [vec![0.2, 0.3, 0.5]];
        for v in [LossVariant::KlForward, LossVariant::KlInverse] {
            assert!(classification_loss(&same, &same, v).unwrap().abs() < 1e-15);
        }
        let f = [vec![0.5, 0.5]];
        let yd = [vec![0.9, 0.1]];
        let inv = classification_loss(&f, &yd, LossVariant::KlInverse).unwrap();
        let expect_inv = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert!((inv - expect_inv).abs() < 1e-14);
        assert!((inv - 0.51083).abs() < 1e-5);
        let fwd = classification_loss(&f, &yd, LossVariant::KlForward).unwrap();
        let expect_fwd = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((fwd - expect_fwd).abs() < 1e-14);
        assert!((fwd - 0.36806).abs() < 1e-5);
    }

    #[test]
    fn compatibility_examples() {
        assert_eq!(compatibility_loss(&[vec![0.0, 1.0, 0.0]], &[NoisyLabel(1)]).unwrap(), 0.0);
        let fresh = softmax(&[0.0, 10.0, 0.0, 0.0]).unwrap();
        let v = compatibility_loss(std::slice::from_ref(&fresh), &[NoisyLabel(1)]).unwrap();
        assert!((v + fresh[1].ln()).abs() < 1e-15);
        assert!((v - 1.36e-4).abs() < 1e-6);
        let v = compatibility_loss(&[vec![0.1; 10]], &[NoisyLabel(7)]).unwrap();
        assert!((v - std::f64::consts::LN_10).abs() < 1e-5);
    }

    #[test]
    fn entropy_loss_examples() {
        assert_eq!(entropy_loss(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), 0.0);
        assert!((entropy_loss(&[vec![0.25; 4]]).unwrap() - 4f64.ln()).abs() < 1e-12);
        let mixed = entropy_loss(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!((mixed - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn label_grad_examples() {
        let y = [0.2, 0.5, 0.3];
        let g = grad_label_logits(&y, &y, NoisyLabel(0), LossVariant::KlInverse, 0.0, 3);
        assert!(g.iter().all(|v| *v == 0.0));

        let yd = [0.7, 0.2, 0.1];
        let f = [0.2, 0.5, 0.3];
        let g = grad_label_logits(&f, &yd, NoisyLabel(0), LossVariant::KlInverse, 0.0, 3);
        let expect = [0.5 / 3.0, -0.3 / 3.0, -0.2 / 3.0];
        assert_close(&g, &expect, 0.0, 1e-15);

        // the same values by central differences through an explicit softmax
        let z: Vec<f64> = yd.iter().map(|v: &f64| v.ln()).collect();
        let fd = finite_diff_grad(
            |z| naive_label_objective(z, &f, 0, LossVariant::KlInverse, 0.0),
            &z,
            FD_STEP,
        )
        .unwrap();
        assert_close(&g, &fd, 1e-6, 1e-9);
    }

    #[test]
    fn forward_kl_gradient_vanishes_at_tiny_true_class() {
        // true class 0 has y_d = 1e-4 while the network puts 0.5 on it
        let yd = [1e-4, 1.0 - 1e-4];
        let f = [0.5, 0.5];
        let fwd = classification_label_grad(&f, &yd, LossVariant::KlForward);
        let inv = classification_label_grad(&f, &yd, LossVariant::KlInverse);
        assert!(fwd[0].abs() < inv[0].abs() / 100.0);
        assert!(fwd[0].abs() <= 1e-3);
        assert!((inv[0] + 0.4999).abs() < 1e-12);
    }

    #[test]
    fn net_grad_examples() {
        let y = [0.1, 0.6, 0.3];
        let g = grad_net_logits(&y, &y, LossVariant::KlInverse, 0.0, 3);
        assert!(g.iter().all(|v| v.abs() < 1e-16));
        // one-hot f: entropy at its minimum, and f = y_d zeroes the KL term
        let onehot = [0.0, 1.0, 0.0];
        let g_b = grad_net_logits(&onehot, &onehot, LossVariant::KlForward, 0.4, 3);
        assert!(g_b.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn finite_difference_agreement_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let c = 2 + trial % 19;
            let f = naive_softmax(&random_logits(&mut rng, c, 3.0));
            let zl = random_logits(&mut rng, c, 3.0);
            let yd = naive_softmax(&zl);
            let noisy = rng.random_range(0..c);
            for v in [LossVariant::KlForward, LossVariant::KlInverse] {
                let g = grad_label_logits(&f, &yd, NoisyLabel(noisy as u32), v, 0.3, c);
                let fd = finite_diff_grad(|z| naive_label_objective(z, &f, noisy, v, 0.3), &zl, FD_STEP)
                    .unwrap();
                assert_close(&g, &fd, 1e-4, 1e-6);

                let zn: Vec<f64> = f.iter().map(|p| p.ln()).collect();
                let g = grad_net_logits(&f, &yd, v, 0.4, c);
                let fd = finite_diff_grad(|z| naive_net_objective(z, &yd, v, 0.4), &zn, FD_STEP).unwrap();
                assert_close(&g, &fd, 1e-4, 1e-6);
            }
        }
    }

    #[test]
    fn binary_inverse_examples() {
        assert!(binary_inverse_kl(&[0.3, 0.8], &[0.3, 0.8]).abs() < 1e-15);
        let v = binary_inverse_kl(&[0.5], &[0.9]);
        let expect = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert!((v - expect).abs() < 1e-14 && (v - 0.51083).abs() < 1e-5);
        let swapped = binary_inverse_kl(&[0.9], &[0.5]);
        assert!((swapped - 0.36806).abs() < 1e-5);
        assert!((v - swapped).abs() > 0.1);
    }

    #[test]
    fn binary_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = rng.random_range(2..8);
            let zf = random_logits(&mut rng, c, 3.0);
            let zl = random_logits(&mut rng, c, 3.0);
            let f: Vec<f64> = zf.iter().map(|&v| sigmoid(v)).collect();
            let yd: Vec<f64> = zl.iter().map(|&v| sigmoid(v)).collect();
            let noisy = rng.random_range(0..c);
            let (alpha, beta) = (0.2, 0.3);
            let cf = c as f64;

            let label_obj = |z: &[f64]| {
                let y: Vec<f64> = z.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
                let bce: f64 = y
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| if j == noisy { -p.ln() } else { -(1.0 - p).ln() })
                    .sum();
                binary_inverse_kl(&f, &y) / cf + alpha * bce
            };
            let g = grad_label_logits(&f, &yd, NoisyLabel(noisy as u32), LossVariant::BinaryInverse, alpha, c);
            let fd = finite_diff_grad(label_obj, &zl, FD_STEP).unwrap();
            assert_close(&g, &fd, 1e-4, 1e-6);

            let net_obj = |z: &[f64]| {
                let p: Vec<f64> = z.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
                let h: f64 = p.iter().map(|&q| -(q * q.ln() + (1.0 - q) * (1.0 - q).ln())).sum();
                binary_inverse_kl(&p, &yd) / cf + beta / cf * h
            };
            let g = grad_net_logits(&f, &yd, LossVariant::BinaryInverse, beta, c);
            let fd = finite_diff_grad(net_obj, &zf, FD_STEP).unwrap();
            assert_close(&g, &fd, 1e-4, 1e-6);
        }
    }

    #[test]
    fn bundle_composition() {
        let f = vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6]];
        let yd = vec![vec![0.8, 0.1, 0.1], vec![0.3, 0.4, 0.3]];
        let labels = [NoisyLabel(0), NoisyLabel(1)];
        let hp = Hyperparams::new(0.1, 0.4).unwrap();
        let b = evaluate_bundle(&f, &yd, &labels, LossVariant::KlInverse, hp, 3).unwrap();
        let expect = b.classification / 3.0 + 0.1 * b.compatibility + 0.4 / 3.0 * b.entropy_term;
        assert!((b.total - expect).abs() < 1e-10);
        assert_eq!(b.grad_label_logits.len(), 2);
        let single = grad_label_logits(&f[1], &yd[1], labels[1], LossVariant::KlInverse, 0.1, 3);
        for (a, s) in b.grad_label_logits[1].iter().zip(&single) {
            assert_eq!(*a, s / 2.0);
        }

        let phase3 = evaluate_bundle(&f, &yd, &labels, LossVariant::KlInverse, Hyperparams::new(0.0, 0.0).unwrap(), 3)
            .unwrap();
        assert_eq!(phase3.total, phase3.classification / 3.0);
    }

    #[test]
    fn bundle_zero_at_agreeing_one_hots() {
        let oh = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = [NoisyLabel(1), NoisyLabel(0)];
        let b = evaluate_bundle(&oh, &oh, &labels, LossVariant::KlInverse, Hyperparams::new(0.5, 0.0).unwrap(), 2)
            .unwrap();
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn beta_does_not_touch_label_gradients() {
        let f = vec![vec![0.6, 0.3, 0.1]];
        let yd = vec![vec![0.5, 0.25, 0.25]];
        let labels = [NoisyLabel(2)];
        for v in [LossVariant::KlForward, LossVariant::KlInverse, LossVariant::BinaryInverse] {
            let a = evaluate_bundle(&f, &yd, &labels, v, Hyperparams::new(0.1, 0.4).unwrap(), 3).unwrap();
            let b = evaluate_bundle(&f, &yd, &labels, v, Hyperparams::new(0.1, 0.8).unwrap(), 3).unwrap();
            assert_eq!(a.grad_label_logits, b.grad_label_logits);
            assert_ne!(a.grad_net_logits, b.grad_net_logits);
        }
    }

    #[test]
    fn bundle_validates() {
        let f = vec![vec![0.5, 0.5]];
        let hp = Hyperparams::new(0.1, 0.1).unwrap();
        assert!(evaluate_bundle(&f, &f, &[], LossVariant::KlInverse, hp, 2).is_err());
        assert!(evaluate_bundle(&f, &f, &[NoisyLabel(0)], LossVariant::KlInverse, hp, 3).is_err());
        assert!(evaluate_bundle(&f, &f, &[NoisyLabel(2)], LossVariant::KlInverse, hp, 2).is_err());
        assert!(Hyperparams::new(-1.0, 0.0).is_err());
        assert!(Hyperparams::new(0.0, f64::NAN).is_err());
    }
}
