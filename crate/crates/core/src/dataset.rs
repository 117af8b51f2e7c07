//! Labeled feature tables and their on-disk formats.
//!
//! Two interchangeable encodings of the same content:
//!
//! - CSV with header `f0,…,f{d-1},true_label,noisy_label`. The `true_label`
//!   cells may be left empty to withhold ground truth.
//! - Binary `PDAT` (little-endian): magic, `u32` version, `u64` n, `u32` dim,
//!   `u32` classes, `u8` has-truth flag, `n*dim` `f64` features row-major,
//!   `n` `u32` true labels (only when the flag is 1), `n` `u32` noisy labels.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::labelbank::{read_f64, read_u32, read_u64};
use crate::rng::{self, Stream};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"PDAT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    num_classes: usize,
    features: Vec<f64>,
    true_labels: Option<Vec<usize>>,
    noisy_labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        dim: usize,
        num_classes: usize,
        features: Vec<f64>,
        true_labels: Option<Vec<usize>>,
        noisy_labels: Vec<usize>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if num_classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        let n = noisy_labels.len();
        if features.len() != n * dim {
            return Err(Error::invalid(format!(
                "{} feature values for {n} rows of dimension {dim}",
                features.len()
            )));
        }
        if let Some(t) = &true_labels {
            if t.len() != n {
                return Err(Error::invalid("true and noisy label counts differ"));
            }
        }
        let all = noisy_labels.iter().chain(true_labels.iter().flatten());
        if let Some(bad) = all.copied().find(|&l| l >= num_classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {num_classes} classes")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Dataset {
            dim,
            num_classes,
            features,
            true_labels,
            noisy_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.noisy_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy_labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.features.chunks(self.dim).collect()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    pub fn noisy_labels(&self) -> &[usize] {
        &self.noisy_labels
    }

    pub fn with_noisy_labels(mut self, noisy: Vec<usize>) -> Result<Self> {
        if noisy.len() != self.len() || noisy.iter().any(|&l| l >= self.num_classes) {
            return Err(Error::invalid("replacement noisy labels do not fit the dataset"));
        }
        self.noisy_labels = noisy;
        Ok(self)
    }

    /// Drops the ground truth.
    pub fn without_truth(mut self) -> Self {
        self.true_labels = None;
        self
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            dim: self.dim,
            num_classes: self.num_classes,
            features,
            true_labels: self
                .true_labels
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            noisy_labels: indices.iter().map(|&i| self.noisy_labels[i]).collect(),
        }
    }

    /// Seeded split into (train, validation, test) by row fractions.
    pub fn split(&self, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Splits> {
        for f in [val_fraction, test_fraction] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::invalid(format!("split fraction {f} outside [0, 1)")));
            }
        }
        let n = self.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        let n_val = (val_fraction * n as f64).round() as usize;
        if n_test + n_val >= n {
            return Err(Error::invalid("no rows left for training after the split"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, Stream::Split));
        let (test, rest) = order.split_at(n_test);
        let (val, train) = rest.split_at(n_val);
        Ok(Splits {
            train_indices: train.to_vec(),
            train: self.subset(train),
            validation: (n_val > 0).then(|| self.subset(val)),
            test: (n_test > 0).then(|| self.subset(test)),
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        header.push("true_label".into());
        header.push("noisy_label".into());
        out.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            rec.push(self.true_labels.as_ref().map(|t| t[i].to_string()).unwrap_or_default());
            rec.push(self.noisy_labels[i].to_string());
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a CSV table; the class count is one past the largest label seen.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let cols = header.len();
        if cols < 3
            || &header[cols - 2] != "true_label"
            || &header[cols - 1] != "noisy_label"
            || (0..cols - 2).any(|j| header[j] != format!("f{j}"))
        {
            return Err(Error::format("dataset", "expected header f0..f{d-1},true_label,noisy_label"));
        }
        let dim = cols - 2;
        let mut features = Vec::new();
        let mut truth = Vec::new();
        let mut missing_truth = 0usize;
        let mut noisy = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = row + 2;
            for j in 0..dim {
                let v: f64 = rec[j].trim().parse().map_err(|_| {
                    Error::format("dataset", format!("line {line}: bad feature {:?}", &rec[j]))
                })?;
                features.push(v);
            }
            let t = rec[dim].trim();
            if t.is_empty() {
                missing_truth += 1;
            } else {
                truth.push(parse_label(t, line)?);
            }
            noisy.push(parse_label(rec[dim + 1].trim(), line)?);
        }
        let true_labels = match (missing_truth, truth.len()) {
            (0, _) => Some(truth),
            (_, 0) => None,
            _ => return Err(Error::format("dataset", "true_label column is partially empty")),
        };
        let max_label = noisy
            .iter()
            .chain(true_labels.iter().flatten())
            .copied()
            .max()
            .unwrap_or(0);
        Dataset::new(dim, (max_label + 1).max(2), features, true_labels, noisy)
            .map_err(|e| Error::format("dataset", e.to_string()))
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.num_classes as u32).to_le_bytes())?;
        w.write_all(&[self.true_labels.is_some() as u8])?;
        for v in &self.features {
            w.write_all(&v.to_le_bytes())?;
        }
        for l in self.true_labels.iter().flatten().chain(&self.noisy_labels) {
            w.write_all(&(*l as u32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("dataset", "bad magic bytes"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::format("dataset", format!("unsupported version {version}")));
        }
        let n = read_u64(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let c = read_u32(&mut r)? as usize;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let features = (0..n * dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut labels = |count: usize| {
            (0..count)
                .map(|_| read_u32(&mut r).map(|v| v as usize))
                .collect::<Result<Vec<_>>>()
        };
        let truth = if flag[0] == 1 { Some(labels(n)?) } else { None };
        let noisy = labels(n)?;
        Dataset::new(dim, c, features, truth, noisy).map_err(|e| Error::format("dataset", e.to_string()))
    }

    /// Saves as CSV when the extension is `.csv`, binary otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        if is_csv(path) {
            self.write_csv(&mut w)?;
        } else {
            self.write_binary(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = std::io::BufReader::new(std::fs::File::open(path)?);
        if is_csv(path) {
            Self::read_csv(r)
        } else {
            Self::read_binary(r)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    /// Row of the source dataset behind each training row.
    pub train_indices: Vec<usize>,
    pub validation: Option<Dataset>,
    pub test: Option<Dataset>,
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn parse_label(s: &str, line: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::format("dataset", format!("line {line}: bad label {s:?}")))
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::format("dataset", e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Dataset {
        Dataset::new(
            2,
            3,
            vec![0.1, -2.5, 1e-300, 3.0, 7.25, 0.1 + 0.2],
            Some(vec![0, 2, 1]),
            vec![0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,true_label,noisy_label\n"));
        assert_eq!(Dataset::read_csv(&buf[..]).unwrap(), d);
    }

    #[test]
    fn truth_can_be_withheld() {
        let d = sample().without_truth();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        assert!(back.true_labels().is_none());
        let mut bin = Vec::new();
        d.write_binary(&mut bin).unwrap();
        assert_eq!(Dataset::read_binary(&bin[..]).unwrap(), d);
    }

    #[test]
    fn csv_errors() {
        assert!(Dataset::read_csv(&b"a,b\n1,2\n"[..]).is_err());
        assert!(Dataset::read_csv(&b"f0,true_label,noisy_label\nx,0,1\n"[..]).is_err());
        assert!(Dataset::read_csv(&b"f0,true_label,noisy_label\n1.0,,1\n2.0,0,1\n"[..]).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let n = 50;
        let d = Dataset::new(1, 2, (0..n).map(|i| i as f64).collect(), None, vec![0; n]).unwrap();
        let s = d.split(0.1, 0.2, 3).unwrap();
        assert_eq!(s.test.as_ref().unwrap().len(), 10);
        assert_eq!(s.validation.as_ref().unwrap().len(), 5);
        assert_eq!(s.train.len(), 35);
        let mut all: Vec<f64> = s.train.features().to_vec();
        all.extend(s.validation.unwrap().features());
        all.extend(s.test.unwrap().features());
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.features());
        assert!(d.split(0.5, 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn binary_roundtrip(rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), 0usize..4, 0usize..4), 1..30)) {
            let features = rows.iter().flat_map(|r| r.0.clone()).collect();
            let truth = rows.iter().map(|r| r.1).collect();
            let noisy = rows.iter().map(|r| r.2).collect();
            let d = Dataset::new(3, 4, features, Some(truth), noisy).unwrap();
            let mut buf = Vec::new();
            d.write_binary(&mut buf).unwrap();
            prop_assert_eq!(Dataset::read_binary(&buf[..]).unwrap(), d.clone());
            let mut text = Vec::new();
            d.write_csv(&mut text).unwrap();
            let back = Dataset::read_csv(&text[..]).unwrap();
            prop_assert_eq!(back.features(), d.features());
        }
    }
}
