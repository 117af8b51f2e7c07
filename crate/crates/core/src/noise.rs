//! Synthetic datasets and label-noise injection.
//!
//! Injectors never modify the clean labels they are given; they return a new
//! label vector drawn from a seeded ChaCha8 stream, so the same
//! `(labels, spec)` always yields the same noisy labels.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// With probability `r`, replace by a uniform draw over all classes.
    Symmetric,
    /// With probability `r`, move to `(class + 1) mod c`.
    AsymCircular,
    /// With probability `r`, move mapped classes to their target.
    AsymMap,
}

impl NoiseKind {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "symmetric" => Some(NoiseKind::Symmetric),
            "asym-circular" => Some(NoiseKind::AsymCircular),
            "asym-map" => Some(NoiseKind::AsymMap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub pair_map: Option<BTreeMap<usize, usize>>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        check_rate(self.rate)?;
        match (&self.kind, &self.pair_map) {
            (NoiseKind::AsymMap, None) => Err(Error::invalid("asym-map noise needs a pair map")),
            (NoiseKind::AsymMap, Some(m)) => check_map(m, num_classes),
            (_, Some(_)) => Err(Error::invalid("a pair map is only meaningful for asym-map noise")),
            _ => Ok(()),
        }
    }
}

fn check_rate(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("noise rate {r} outside [0, 1]")));
    }
    Ok(())
}

fn check_map(map: &BTreeMap<usize, usize>, c: usize) -> Result<()> {
    for (&from, &to) in map {
        if from >= c || to >= c {
            return Err(Error::invalid(format!("map entry {from}->{to} out of range for {c} classes")));
        }
    }
    Ok(())
}

fn check_labels(labels: &[usize], c: usize) -> Result<()> {
    if c < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("label {l} out of range for {c} classes")));
    }
    Ok(())
}

pub fn inject_symmetric(true_labels: &[usize], c: usize, r: f64, seed: u64) -> Result<Vec<usize>> {
    check_rate(r)?;
    check_labels(true_labels, c)?;
    let mut rng = rng::stream(seed, Stream::Noise);
    Ok(true_labels
        .iter()
        .map(|&l| {
            if rng.random::<f64>() < r {
                rng.random_range(0..c)
            } else {
                l
            }
        })
        .collect())
}

pub fn inject_asym_circular(true_labels: &[usize], c: usize, r: f64, seed: u64) -> Result<Vec<usize>> {
    check_rate(r)?;
    check_labels(true_labels, c)?;
    let mut rng = rng::stream(seed, Stream::Noise);
    Ok(true_labels
        .iter()
        .map(|&l| if rng.random::<f64>() < r { (l + 1) % c } else { l })
        .collect())
}

pub fn inject_asym_map(
    true_labels: &[usize],
    c: usize,
    r: f64,
    pair_map: &BTreeMap<usize, usize>,
    seed: u64,
) -> Result<Vec<usize>> {
    check_rate(r)?;
    check_labels(true_labels, c)?;
    check_map(pair_map, c)?;
    let mut rng = rng::stream(seed, Stream::Noise);
    Ok(true_labels
        .iter()
        .map(|&l| {
            let flip = rng.random::<f64>() < r;
            match pair_map.get(&l) {
                Some(&to) if flip => to,
                _ => l,
            }
        })
        .collect())
}

pub fn inject(true_labels: &[usize], c: usize, spec: &NoiseSpec) -> Result<Vec<usize>> {
    spec.validate(c)?;
    match spec.kind {
        NoiseKind::Symmetric => inject_symmetric(true_labels, c, spec.rate, spec.seed),
        NoiseKind::AsymCircular => inject_asym_circular(true_labels, c, spec.rate, spec.seed),
        NoiseKind::AsymMap => {
            inject_asym_map(true_labels, c, spec.rate, spec.pair_map.as_ref().unwrap(), spec.seed)
        }
    }
}

/// Fraction of positions where the two label vectors differ.
pub fn corruption_fraction(true_labels: &[usize], noisy: &[usize]) -> f64 {
    if true_labels.is_empty() {
        return 0.0;
    }
    let wrong = true_labels.iter().zip(noisy).filter(|(a, b)| a != b).count();
    wrong as f64 / true_labels.len() as f64
}

/// truck→automobile, bird→airplane, deer→horse, cat↔dog in CIFAR-10 class ids.
pub fn cifar10_pair_map() -> BTreeMap<usize, usize> {
    BTreeMap::from([(9, 1), (2, 0), (4, 7), (3, 5), (5, 3)])
}

/// Parses `3:5,5:3` into a class map.
pub fn parse_pair_map(s: &str) -> Result<BTreeMap<usize, usize>> {
    if s.trim() == "cifar10" {
        return Ok(cifar10_pair_map());
    }
    let mut map = BTreeMap::new();
    for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (from, to) = entry
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("map entry {entry:?} is not from:to")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad class {v:?} in map")))
        };
        map.insert(parse(from)?, parse(to)?);
    }
    Ok(map)
}

/// Balanced isotropic Gaussian clusters with unit variance.
///
/// Centers sit on a circle in the first two coordinates (on a line when
/// `dim == 1`) with neighbouring centers exactly `separation` apart, so every
/// pair is at least that far apart. Returned rows are shuffled; noisy labels
/// start equal to the true labels.
pub fn make_blobs(n: usize, c: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if c < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if n < c {
        return Err(Error::invalid(format!("{n} rows cannot cover {c} classes")));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(separation.is_finite() && separation > 0.0) {
        return Err(Error::invalid("separation must be positive"));
    }
    let centers: Vec<Vec<f64>> = (0..c)
        .map(|k| {
            let mut center = vec![0.0; dim];
            if dim == 1 {
                center[0] = k as f64 * separation;
            } else {
                let radius = separation / (2.0 * (std::f64::consts::PI / c as f64).sin());
                let angle = 2.0 * std::f64::consts::PI * k as f64 / c as f64;
                center[0] = radius * angle.cos();
                center[1] = radius * angle.sin();
            }
            center
        })
        .collect();

    let mut rng = rng::stream(seed, Stream::Blobs);
    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * dim);
    for &l in &labels {
        for &m in &centers[l] {
            let z: f64 = rng.sample(StandardNormal);
            features.push(m + z);
        }
    }
    Dataset::new(dim, c, features, Some(labels.clone()), labels)
}
