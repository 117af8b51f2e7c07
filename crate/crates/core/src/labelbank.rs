//! Per-example label variables.
//!
//! The bank owns three kinds of labels for every training example: the
//! observed noisy class (never mutated), the unconstrained label logits that
//! are optimized directly, and the label distribution derived from them by
//! softmax.

use std::io::{Read, Write};

use crate::numerics::{self, ProbVector};
use crate::{Error, Result};

/// Default logit magnitude used to initialize label logits from noisy labels.
pub const DEFAULT_INIT_CONSTANT: f64 = 10.0;

const MAGIC: &[u8; 4] = b"PNCL";
const VERSION: u32 = 1;

/// Observed (possibly wrong) hard label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoisyLabel(pub u32);

impl NoisyLabel {
    pub fn class(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelBank {
    num_classes: usize,
    init_constant: f64,
    noisy: Vec<NoisyLabel>,
    // n x c, row-major
    logits: Vec<f64>,
}

impl LabelBank {
    /// Sets every example's label logits to `K * onehot(noisy)`.
    pub fn init_from_noisy(labels: &[NoisyLabel], num_classes: usize, k: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("label bank needs at least two classes"));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid(format!("init constant must be positive, got {k}")));
        }
        if let Some((i, l)) = labels
            .iter()
            .enumerate()
            .find(|(_, l)| l.class() >= num_classes)
        {
            return Err(Error::invalid(format!(
                "example {i} has class {} but there are only {num_classes} classes",
                l.0
            )));
        }
        let mut bank = LabelBank {
            num_classes,
            init_constant: k,
            noisy: labels.to_vec(),
            logits: vec![0.0; labels.len() * num_classes],
        };
        bank.fill_from_noisy();
        Ok(bank)
    }

    fn fill_from_noisy(&mut self) {
        self.logits.iter_mut().for_each(|v| *v = 0.0);
        let c = self.num_classes;
        for (i, l) in self.noisy.iter().enumerate() {
            self.logits[i * c + l.class()] = self.init_constant;
        }
    }

    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn init_constant(&self) -> f64 {
        self.init_constant
    }

    pub fn noisy_labels(&self) -> &[NoisyLabel] {
        &self.noisy
    }

    pub fn logits(&self, i: usize) -> Result<&[f64]> {
        self.check_index(i)?;
        Ok(self.row(i))
    }

    /// Raw row-major logit storage, `len() * num_classes()` values.
    pub fn all_logits(&self) -> &[f64] {
        &self.logits
    }

    fn row(&self, i: usize) -> &[f64] {
        let c = self.num_classes;
        &self.logits[i * c..(i + 1) * c]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::invalid(format!(
                "example index {i} out of range for bank of {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Label distribution of example `i`.
    pub fn distribution(&self, i: usize) -> Result<ProbVector> {
        self.check_index(i)?;
        numerics::softmax(self.row(i))
    }

    pub(crate) fn distribution_into(&self, i: usize, out: &mut [f64]) {
        numerics::softmax_into(self.row(i), out);
    }

    /// Gradient step on the label logits of `batch` only: `y <- y - lambda * grad`.
    pub fn apply_label_update(
        &mut self,
        batch: &[usize],
        grads: &[Vec<f64>],
        lambda: f64,
    ) -> Result<()> {
        if batch.len() != grads.len() {
            return Err(Error::invalid(format!(
                "{} batch indices but {} gradients",
                batch.len(),
                grads.len()
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        let c = self.num_classes;
        for (&i, g) in batch.iter().zip(grads) {
            self.check_index(i)?;
            if g.len() != c {
                return Err(Error::invalid(format!(
                    "gradient for example {i} has {} components, expected {c}",
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "non-finite label gradient for example {i}"
                )));
            }
        }
        for (&i, g) in batch.iter().zip(grads) {
            for (y, d) in self.logits[i * c..(i + 1) * c].iter_mut().zip(g) {
                *y -= lambda * d;
            }
        }
        Ok(())
    }

    /// Argmax class of every label distribution.
    pub fn hard_labels(&self) -> Vec<usize> {
        let mut buf = vec![0.0; self.num_classes];
        (0..self.len())
            .map(|i| {
                self.distribution_into(i, &mut buf);
                numerics::argmax(&buf)
            })
            .collect()
    }

    /// Re-derives the logits from the original noisy labels.
    pub fn reset(&mut self) {
        self.fill_from_noisy();
    }

    /// Number of examples whose hard label equals the hidden true label.
    pub fn correct_label_count(&self, true_labels: &[usize]) -> Result<usize> {
        if true_labels.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} true labels for a bank of {}",
                true_labels.len(),
                self.len()
            )));
        }
        Ok(self
            .hard_labels()
            .iter()
            .zip(true_labels)
            .filter(|(a, b)| a == b)
            .count())
    }

    /// Writes the `PNCL` checkpoint.
    ///
    /// Layout (little-endian): magic `PNCL`, `u32` version, `u64` n, `u32` c,
    /// `f64` K, then `n * c` `f64` logits row-major, then `n` `u32` noisy classes.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.num_classes as u32).to_le_bytes())?;
        w.write_all(&self.init_constant.to_le_bytes())?;
        for v in &self.logits {
            w.write_all(&v.to_le_bytes())?;
        }
        for l in &self.noisy {
            w.write_all(&l.0.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("label bank", "bad magic bytes"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::format("label bank", format!("unsupported version {version}")));
        }
        let n = read_u64(&mut r)? as usize;
        let c = read_u32(&mut r)? as usize;
        let k = read_f64(&mut r)?;
        let mut logits = Vec::with_capacity(n.saturating_mul(c).min(1 << 24));
        for _ in 0..n * c {
            logits.push(read_f64(&mut r)?);
        }
        let mut noisy = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let l = read_u32(&mut r)?;
            if l as usize >= c {
                return Err(Error::format("label bank", format!("class {l} out of range")));
            }
            noisy.push(NoisyLabel(l));
        }
        if c < 2 || k.is_nan() || k <= 0.0 {
            return Err(Error::format("label bank", "invalid header"));
        }
        Ok(LabelBank {
            num_classes: c,
            init_constant: k,
            noisy,
            logits,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
