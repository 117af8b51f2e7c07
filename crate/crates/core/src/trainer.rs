//! Three-phase training: backbone learning, joint label/network learning,
//! and fine-tuning on the learned label distributions.
//!
//! The training path only ever sees features and noisy labels ([`TrainSet`]).
//! Ground truth lives in [`Monitor`] and is read for metrics alone, so a run
//! with the truth withheld trains identically and just reports fewer numbers.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{Backbone, MlpConfig, Sgd};
use crate::config::RunConfig;
use crate::dataset::{Dataset, Splits};
use crate::labelbank::{LabelBank, NoisyLabel};
use crate::losses::{self, Hyperparams};
use crate::rng::{self, Stream, RNG_ALGORITHM};
use crate::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Backbone,
    Pencil,
    Finetune,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Backbone => "backbone",
            Phase::Pencil => "pencil",
            Phase::Finetune => "finetune",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub repeat: usize,
    pub loss_total: f64,
    pub loss_classification: f64,
    pub loss_compatibility: Option<f64>,
    pub loss_entropy: Option<f64>,
    pub correct_label_count: Option<usize>,
    pub test_accuracy: Option<f64>,
    pub validation_accuracy: Option<f64>,
    pub lambda: Option<f64>,
    pub learning_rate: f64,
}

/// Features and observed labels; everything the optimizer may read.
#[derive(Debug, Clone)]
pub struct TrainSet {
    rows: Vec<Vec<f64>>,
    noisy: Vec<NoisyLabel>,
    num_classes: usize,
}

impl TrainSet {
    pub fn from_dataset(d: &Dataset) -> Self {
        TrainSet {
            rows: d.rows().into_iter().map(<[f64]>::to_vec).collect(),
            noisy: d.noisy_labels().iter().map(|&l| NoisyLabel(l as u32)).collect(),
            num_classes: d.num_classes(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn noisy_labels(&self) -> &[NoisyLabel] {
        &self.noisy
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Held-out data and ground truth used only for reporting.
#[derive(Debug, Clone, Default)]
pub struct Monitor {
    pub train_truth: Option<Vec<usize>>,
    /// Scored against its noisy labels.
    pub validation: Option<Dataset>,
    /// Scored against its true labels.
    pub test: Option<Dataset>,
}

impl Monitor {
    fn accuracy(net: &Backbone, d: &Option<Dataset>, truth: bool) -> Result<Option<f64>> {
        let Some(d) = d else { return Ok(None) };
        let labels = if truth {
            match d.true_labels() {
                Some(t) => t,
                None => return Ok(None),
            }
        } else {
            d.noisy_labels()
        };
        net.evaluate_accuracy(&d.rows(), labels).map(Some)
    }
}

/// Records, for selected examples, the classification part of the label-logit
/// gradient, `(1/c) dL_c/dy`, once per label-learning epoch. The compatibility
/// term is left out: it pulls toward the noisy label regardless of the loss
/// variant being compared.
#[derive(Debug, Clone, Default)]
pub struct GradProbe {
    /// train position -> (dataset row, original class, true class)
    targets: BTreeMap<usize, (usize, usize, usize)>,
    pub rows: Vec<ProbeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub epoch: usize,
    pub example: usize,
    pub grad_original: f64,
    pub grad_true: f64,
}

impl GradProbe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn watch(&mut self, train_position: usize, dataset_row: usize, original: usize, truth: usize) {
        self.targets.insert(train_position, (dataset_row, original, truth));
    }
}

/// Wall-clock time per phase; kept out of the report so reports stay reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: Phase,
    pub repeat: usize,
    pub epochs: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEpoch {
    pub epoch: usize,
    pub test_accuracy: f64,
    /// `"validation"` when a validation split picked the epoch, `"test"` otherwise.
    pub selected_by: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatStart {
    pub repeat: usize,
    pub first_epoch: usize,
    pub hard_labels_match_noisy: bool,
    pub correct_label_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub dim: usize,
    pub classes: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub has_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub correct_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub rng_algorithm: String,
    /// `"pencil"` or `"baseline_ce"`.
    pub mode: String,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub epochs: Vec<EpochRecord>,
    pub best: Option<BestEpoch>,
    pub last_test_accuracy: Option<f64>,
    pub initial_correct_labels: Option<usize>,
    pub final_correct_labels: Option<usize>,
    pub correct_label_curve: Vec<CurvePoint>,
    pub repeat_starts: Vec<RepeatStart>,
}

impl RunReport {
    pub fn is_baseline(&self) -> bool {
        self.mode == "baseline_ce"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// `epoch,correct_count` lines with a header.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("epoch,correct_count\n");
        for p in &self.correct_label_curve {
            s.push_str(&format!("{},{}\n", p.epoch, p.correct_count));
        }
        s
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub net: Backbone,
    pub bank: Option<LabelBank>,
    pub timings: Vec<PhaseTiming>,
}

/// Mutable state threaded through the phases of one run.
pub struct Session {
    config: RunConfig,
    train: TrainSet,
    monitor: Monitor,
    shuffle: ChaCha8Rng,
    records: Vec<EpochRecord>,
    timings: Vec<PhaseTiming>,
    probe: Option<GradProbe>,
}

#[derive(Default)]
struct EpochLoss {
    total: f64,
    classification: f64,
    compatibility: f64,
    entropy: f64,
    count: usize,
}

impl EpochLoss {
    fn add(&mut self, b: usize, total: f64, cls: f64, compat: f64, ent: f64) {
        let w = b as f64;
        self.total += w * total;
        self.classification += w * cls;
        self.compatibility += w * compat;
        self.entropy += w * ent;
        self.count += b;
    }

    fn mean(&self) -> (f64, f64, f64, f64) {
        let n = self.count as f64;
        (self.total / n, self.classification / n, self.compatibility / n, self.entropy / n)
    }
}

impl Session {
    pub fn new(config: RunConfig, train: TrainSet, monitor: Monitor) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::invalid("empty training set"));
        }
        if let Some(t) = &monitor.train_truth {
            if t.len() != train.len() {
                return Err(Error::invalid("training truth does not match the training set"));
            }
        }
        let shuffle = rng::stream(config.seed, Stream::Shuffle);
        Ok(Session {
            config,
            train,
            monitor,
            shuffle,
            records: Vec::new(),
            timings: Vec::new(),
            probe: None,
        })
    }

    /// Splits `dataset` per the config and builds a session over the training part.
    pub fn from_dataset(config: RunConfig, dataset: &Dataset) -> Result<(Self, Splits)> {
        let splits = dataset.split(config.val_fraction, config.test_fraction, config.seed)?;
        let train = TrainSet::from_dataset(&splits.train);
        let monitor = Monitor {
            train_truth: splits.train.true_labels().map(<[usize]>::to_vec),
            validation: splits.validation.clone(),
            test: splits.test.clone(),
        };
        Ok((Session::new(config, train, monitor)?, splits))
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn train_set(&self) -> &TrainSet {
        &self.train
    }

    pub fn set_probe(&mut self, probe: GradProbe) {
        self.probe = Some(probe);
    }

    pub fn take_probe(&mut self) -> Option<GradProbe> {
        self.probe.take()
    }

    pub fn new_backbone(&self) -> Result<Backbone> {
        let mut sizes = vec![self.train.dim()];
        sizes.extend(&self.config.hidden);
        sizes.push(self.train.num_classes());
        Backbone::new(
            MlpConfig {
                layer_sizes: sizes,
                activation: self.config.activation,
                seed: self.config.seed,
            },
            Sgd {
                learning_rate: self.config.lr,
                momentum: self.config.momentum,
                weight_decay: self.config.weight_decay,
            },
        )
    }

    pub fn new_bank(&self) -> Result<LabelBank> {
        LabelBank::init_from_noisy(&self.train.noisy, self.train.num_classes, self.config.init_constant)
    }

    fn batches(&mut self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.shuffle);
        order.chunks(self.config.batch_size).map(<[usize]>::to_vec).collect()
    }

    fn batch_rows(&self, batch: &[usize]) -> Vec<&[f64]> {
        batch.iter().map(|&i| self.train.rows[i].as_slice()).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn push_record(
        &mut self,
        net: &Backbone,
        bank: Option<&LabelBank>,
        phase: Phase,
        repeat: usize,
        loss: &EpochLoss,
        lambda: Option<f64>,
        lr: f64,
    ) -> Result<EpochRecord> {
        let (total, cls, compat, ent) = loss.mean();
        if !total.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss {total}")));
        }
        let with_terms = phase == Phase::Pencil;
        let correct = match (bank, &self.monitor.train_truth) {
            (Some(b), Some(t)) => Some(b.correct_label_count(t)?),
            _ => None,
        };
        let record = EpochRecord {
            epoch: self.records.len(),
            phase,
            repeat,
            loss_total: total,
            loss_classification: cls,
            loss_compatibility: with_terms.then_some(compat),
            loss_entropy: with_terms.then_some(ent),
            correct_label_count: correct,
            test_accuracy: Monitor::accuracy(net, &self.monitor.test, true)?,
            validation_accuracy: Monitor::accuracy(net, &self.monitor.validation, false)?,
            lambda,
            learning_rate: lr,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    fn timed<T>(&mut self, phase: Phase, repeat: usize, epochs: usize, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self).map_err(|e| e.in_phase(phase.name()))?;
        self.timings.push(PhaseTiming {
            phase,
            repeat,
            epochs,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    /// Cross-entropy epochs on the noisy labels at a fixed learning rate.
    fn cross_entropy_epochs(
        &mut self,
        net: &mut Backbone,
        epochs: usize,
        phase: Phase,
        lr_at: impl Fn(usize) -> f64,
    ) -> Result<Vec<EpochRecord>> {
        let c = self.train.num_classes;
        let mut out = Vec::with_capacity(epochs);
        for t in 0..epochs {
            let lr = lr_at(t);
            net.sgd.learning_rate = lr;
            let mut loss = EpochLoss::default();
            for batch in self.batches() {
                let fwd = net.forward(&self.batch_rows(&batch))?;
                let labels: Vec<NoisyLabel> = batch.iter().map(|&i| self.train.noisy[i]).collect();
                let ce = losses::cross_entropy_loss(&fwd.probs, &labels)?;
                let b = batch.len() as f64;
                let grads: Vec<Vec<f64>> = fwd
                    .probs
                    .iter()
                    .zip(&labels)
                    .map(|(p, l)| {
                        (0..c)
                            .map(|j| (p[j] - if j == l.class() { 1.0 } else { 0.0 }) / b)
                            .collect()
                    })
                    .collect();
                net.backward_and_step(&fwd.cache, &grads)?;
                loss.add(batch.len(), ce, ce, 0.0, 0.0);
            }
            out.push(self.push_record(net, None, phase, 0, &loss, None, lr)?);
        }
        Ok(out)
    }

    /// Backbone learning: cross entropy on the noisy labels, fixed learning rate.
    pub fn phase1_backbone(&mut self, net: &mut Backbone) -> Result<Vec<EpochRecord>> {
        let (epochs, lr) = (self.config.epochs_backbone, self.config.lr);
        self.timed(Phase::Backbone, 0, epochs, |s| {
            s.cross_entropy_epochs(net, epochs, Phase::Backbone, |_| lr)
        })
    }

    /// Joint updates of the network and the label logits.
    pub fn phase2_pencil(
        &mut self,
        net: &mut Backbone,
        bank: &mut LabelBank,
        repeat: usize,
    ) -> Result<Vec<EpochRecord>> {
        let epochs = self.config.epochs_pencil;
        self.timed(Phase::Pencil, repeat, epochs, |s| s.pencil_epochs(net, bank, repeat))
    }

    fn damping(&self, repeat: usize) -> f64 {
        self.config.repeat_damping.powi(repeat as i32)
    }

    fn pencil_epochs(&mut self, net: &mut Backbone, bank: &mut LabelBank, repeat: usize) -> Result<Vec<EpochRecord>> {
        let c = self.train.num_classes;
        if bank.len() != self.train.len() || bank.num_classes() != c {
            return Err(Error::invalid("label bank does not match the training set"));
        }
        let damping = self.damping(repeat);
        let lr = self.config.lr * damping;
        let hp = self.config.hyperparams();
        let variant = self.config.variant;
        let total_epochs = self.config.epochs_pencil;
        let mut out = Vec::with_capacity(total_epochs);
        let mut yd_buf = vec![0.0; c];
        for t in 0..total_epochs {
            let lambda = self.config.lambda.value(t, total_epochs) * damping;
            net.sgd.learning_rate = lr;
            let mut loss = EpochLoss::default();
            for batch in self.batches() {
                let fwd = net.forward(&self.batch_rows(&batch))?;
                let yd: Vec<Vec<f64>> = batch
                    .iter()
                    .map(|&i| {
                        bank.distribution_into(i, &mut yd_buf);
                        yd_buf.clone()
                    })
                    .collect();
                let labels: Vec<NoisyLabel> = batch.iter().map(|&i| self.train.noisy[i]).collect();
                let bundle = losses::evaluate_bundle(&fwd.probs, &yd, &labels, variant, hp, c)?;
                if let Some(probe) = &mut self.probe {
                    for (k, &i) in batch.iter().enumerate() {
                        if let Some(&(row, original, truth)) = probe.targets.get(&i) {
                            let g = losses::classification_label_grad(&fwd.probs[k], &yd[k], variant);
                            probe.rows.push(ProbeRow {
                                epoch: t,
                                example: row,
                                grad_original: g[original] / c as f64,
                                grad_true: g[truth] / c as f64,
                            });
                        }
                    }
                }
                net.backward_and_step(&fwd.cache, &bundle.grad_net_logits)?;
                bank.apply_label_update(&batch, &bundle.grad_label_logits, lambda)?;
                loss.add(
                    batch.len(),
                    bundle.total,
                    bundle.classification,
                    bundle.compatibility,
                    bundle.entropy_term,
                );
            }
            out.push(self.push_record(net, Some(bank), Phase::Pencil, repeat, &loss, Some(lambda), lr)?);
        }
        Ok(out)
    }

    /// Learning rate of fine-tuning epoch `t`.
    pub fn finetune_lr(&self, t: usize, repeat: usize) -> f64 {
        let drops = self.config.lr_decay_epochs.iter().filter(|&&e| e <= t).count();
        self.config.lr_finetune * 0.1f64.powi(drops as i32) * self.damping(repeat)
    }

    /// Fine-tuning on `(1/c) L_c` against the frozen label distributions.
    pub fn phase3_finetune(
        &mut self,
        net: &mut Backbone,
        bank: &LabelBank,
        repeat: usize,
    ) -> Result<Vec<EpochRecord>> {
        let epochs = self.config.epochs_finetune;
        self.timed(Phase::Finetune, repeat, epochs, |s| s.finetune_epochs(net, bank, repeat))
    }

    fn finetune_epochs(&mut self, net: &mut Backbone, bank: &LabelBank, repeat: usize) -> Result<Vec<EpochRecord>> {
        let c = self.train.num_classes;
        if bank.len() != self.train.len() || bank.num_classes() != c {
            return Err(Error::invalid("label bank does not match the training set"));
        }
        let hp = Hyperparams {
            alpha: 0.0,
            beta: 0.0,
        };
        let variant = self.config.variant;
        let yd_all: Vec<Vec<f64>> = (0..bank.len())
            .map(|i| bank.distribution(i).map(|p| p.into_inner()))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(self.config.epochs_finetune);
        for t in 0..self.config.epochs_finetune {
            let lr = self.finetune_lr(t, repeat);
            net.sgd.learning_rate = lr;
            let mut loss = EpochLoss::default();
            for batch in self.batches() {
                let fwd = net.forward(&self.batch_rows(&batch))?;
                let yd: Vec<&[f64]> = batch.iter().map(|&i| yd_all[i].as_slice()).collect();
                let labels: Vec<NoisyLabel> = batch.iter().map(|&i| self.train.noisy[i]).collect();
                let bundle = losses::evaluate_bundle(&fwd.probs, &yd, &labels, variant, hp, c)?;
                net.backward_and_step(&fwd.cache, &bundle.grad_net_logits)?;
                loss.add(batch.len(), bundle.total, bundle.classification, 0.0, 0.0);
            }
            out.push(self.push_record(net, Some(bank), Phase::Finetune, repeat, &loss, None, lr)?);
        }
        Ok(out)
    }

    /// Backbone learning, then `repeat_count + 1` rounds of label learning and
    /// fine-tuning. Each round after the first restarts the label logits from
    /// the original noisy labels and continues from the latest network.
    pub fn run_pipeline(mut self) -> Result<RunOutcome> {
        let mut net = self.new_backbone()?;
        self.phase1_backbone(&mut net)?;
        let mut bank = self.new_bank()?;
        let initial_correct = self.correct_count(&bank)?;
        let mut repeat_starts = Vec::new();
        for repeat in 0..=self.config.repeat_count {
            if repeat > 0 {
                bank.reset();
            }
            let noisy: Vec<usize> = self.train.noisy.iter().map(|l| l.class()).collect();
            repeat_starts.push(RepeatStart {
                repeat,
                first_epoch: self.records.len(),
                hard_labels_match_noisy: bank.hard_labels() == noisy,
                correct_label_count: self.correct_count(&bank)?,
            });
            self.phase2_pencil(&mut net, &mut bank, repeat)?;
            self.phase3_finetune(&mut net, &bank, repeat)?;
        }
        let final_correct = self.correct_count(&bank)?;
        let report = self.build_report("pencil", initial_correct, final_correct, repeat_starts);
        Ok(RunOutcome {
            report,
            net,
            bank: Some(bank),
            timings: self.timings,
        })
    }

    /// Cross entropy on the noisy labels for the same epoch budget: fixed
    /// learning rate for the first two phases' epochs, then the fine-tuning
    /// schedule. No label learning.
    pub fn run_baseline(mut self) -> Result<RunOutcome> {
        let mut net = self.new_backbone()?;
        let fixed = self.config.epochs_backbone + self.config.epochs_pencil;
        let lr = self.config.lr;
        self.timed(Phase::Backbone, 0, fixed, |s| {
            s.cross_entropy_epochs(&mut net, fixed, Phase::Backbone, |_| lr)
        })?;
        let finetune = self.config.epochs_finetune;
        let schedule: Vec<f64> = (0..finetune).map(|t| self.finetune_lr(t, 0)).collect();
        self.timed(Phase::Finetune, 0, finetune, |s| {
            s.cross_entropy_epochs(&mut net, finetune, Phase::Finetune, |t| schedule[t])
        })?;
        let report = self.build_report("baseline_ce", None, None, Vec::new());
        Ok(RunOutcome {
            report,
            net,
            bank: None,
            timings: self.timings,
        })
    }

    fn correct_count(&self, bank: &LabelBank) -> Result<Option<usize>> {
        self.monitor
            .train_truth
            .as_ref()
            .map(|t| bank.correct_label_count(t))
            .transpose()
    }

    fn build_report(
        &self,
        mode: &str,
        initial_correct: Option<usize>,
        final_correct: Option<usize>,
        repeat_starts: Vec<RepeatStart>,
    ) -> RunReport {
        let m = &self.monitor;
        RunReport {
            format_version: REPORT_VERSION,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            mode: mode.to_string(),
            config: self.config.clone(),
            dataset: DatasetSummary {
                rows: self.train.len()
                    + m.validation.as_ref().map_or(0, Dataset::len)
                    + m.test.as_ref().map_or(0, Dataset::len),
                dim: self.train.dim(),
                classes: self.train.num_classes,
                train: self.train.len(),
                validation: m.validation.as_ref().map_or(0, Dataset::len),
                test: m.test.as_ref().map_or(0, Dataset::len),
                has_truth: m.train_truth.is_some(),
            },
            best: best_epoch(&self.records),
            last_test_accuracy: self.records.last().and_then(|r| r.test_accuracy),
            initial_correct_labels: initial_correct,
            final_correct_labels: final_correct,
            correct_label_curve: self
                .records
                .iter()
                .filter(|r| r.phase == Phase::Pencil)
                .filter_map(|r| {
                    r.correct_label_count.map(|n| CurvePoint {
                        epoch: r.epoch,
                        correct_count: n,
                    })
                })
                .collect(),
            repeat_starts,
            epochs: self.records.clone(),
        }
    }

    pub fn timings(&self) -> &[PhaseTiming] {
        &self.timings
    }
}

/// Test accuracy at the epoch with the highest validation accuracy (earliest on
/// ties); falls back to the highest test accuracy without a validation split.
pub fn best_epoch(records: &[EpochRecord]) -> Option<BestEpoch> {
    let pick = |key: fn(&EpochRecord) -> Option<f64>| {
        records
            .iter()
            .filter_map(|r| key(r).map(|k| (k, r)))
            .fold(None::<(f64, &EpochRecord)>, |best, (k, r)| match best {
                Some((bk, _)) if bk >= k => best,
                _ => Some((k, r)),
            })
            .map(|(_, r)| r)
    };
    if let Some(r) = pick(|r| r.validation_accuracy) {
        return r.test_accuracy.map(|acc| BestEpoch {
            epoch: r.epoch,
            test_accuracy: acc,
            selected_by: "validation".into(),
        });
    }
    pick(|r| r.test_accuracy).map(|r| BestEpoch {
        epoch: r.epoch,
        test_accuracy: r.test_accuracy.unwrap(),
        selected_by: "test".into(),
    })
}

/// Splits, trains and reports; `baseline` selects cross-entropy-only training.
pub fn run(config: RunConfig, dataset: &Dataset, baseline: bool) -> Result<RunOutcome> {
    let (session, _) = Session::from_dataset(config, dataset)?;
    if baseline {
        session.run_baseline()
    } else {
        session.run_pipeline()
    }
}
