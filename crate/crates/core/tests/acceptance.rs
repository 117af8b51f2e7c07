//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pencil::config::RunConfig;
use pencil::dataset::Dataset;
use pencil::labelbank::{LabelBank, NoisyLabel};
use pencil::losses::{self, LossVariant};
use pencil::noise::{self, inject_asym_circular, inject_symmetric, make_blobs};
use pencil::trainer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---- independent oracles ----

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// `(1/c) L_c + alpha L_o + (beta/c) L_e` for one example, from raw logits.
fn objective(z: &[f64], ylog: &[f64], label: usize, forward: bool, alpha: f64, beta: f64) -> f64 {
    let c = z.len() as f64;
    let f = softmax(z);
    let y = softmax(ylog);
    let lc: f64 = if forward {
        (0..z.len()).map(|j| y[j] * (y[j] / f[j]).ln()).sum()
    } else {
        (0..z.len()).map(|j| f[j] * (f[j] / y[j]).ln()).sum()
    };
    let h: f64 = -f.iter().map(|p| p * p.ln()).sum::<f64>();
    lc / c - alpha * y[label].ln() + beta / c * h
}

fn central_diff(g: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (g(&p) - g(&m)) / (2.0 * h)
        })
        .collect()
}

/// Worst violation ratio of `|a-b| <= max(1e-4 |b|, 1e-6)`; <= 1 passes.
fn violation(closed: &[f64], numeric: &[f64]) -> f64 {
    closed
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / (1e-4 * b.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn normal_vec(rng: &mut ChaCha8Rng, c: usize, scale: f64) -> Vec<f64> {
    (0..c)
        .map(|_| {
            // Box-Muller keeps the oracle free of the library's sampling code
            let (u, v): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
            scale * (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect()
}

// ---- shared task ----

fn blobs_task(seed: u64) -> Dataset {
    let clean = make_blobs(2000, 4, 2, 5.0, seed).expect("blobs");
    let noisy = inject_symmetric(clean.true_labels().unwrap(), 4, 0.3, seed).expect("noise");
    clean.with_noisy_labels(noisy).expect("labels")
}

fn recipe(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        ..RunConfig::default()
    }
}

// ---- criteria ----

fn gradient_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 4];
    let trials_per_variant = 150;
    for t in 0..trials_per_variant {
        let c = 2 + t % 19;
        let z = normal_vec(&mut rng, c, 2.0);
        let yl = normal_vec(&mut rng, c, 2.0);
        let label = rng.random_range(0..c);
        let (alpha, beta): (f64, f64) = (rng.random(), rng.random());
        let f = softmax(&z);
        let y = softmax(&yl);
        for (k, variant) in [LossVariant::KlForward, LossVariant::KlInverse].into_iter().enumerate() {
            let fw = variant == LossVariant::KlForward;
            let num_y = central_diff(|v| objective(&z, v, label, fw, alpha, beta), &yl);
            let num_z = central_diff(|v| objective(v, &yl, label, fw, alpha, beta), &z);
            let g_y = losses::grad_label_logits(&f, &y, NoisyLabel(label as u32), variant, alpha, c);
            let g_z = losses::grad_net_logits(&f, &y, variant, beta, c);
            worst[2 * k] = worst[2 * k].max(violation(&g_y, &num_y));
            worst[2 * k + 1] = worst[2 * k + 1].max(violation(&g_z, &num_z));
        }
    }
    let pass = worst.iter().all(|&w| w <= 1.0);
    verdict(
        pass,
        format!(
            "{trials_per_variant} instances per variant, c in 2..=20; worst tolerance ratio fwd label {:.2e} net {:.2e}, inv label {:.2e} net {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn zero_sum() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let c = 2 + t % 19;
        let scale = [0.5, 2.0, 6.0][t % 3];
        let f = softmax(&normal_vec(&mut rng, c, scale));
        let y = softmax(&normal_vec(&mut rng, c, scale));
        for variant in [LossVariant::KlForward, LossVariant::KlInverse] {
            let s: f64 = losses::classification_label_grad(&f, &y, variant).iter().sum();
            worst = worst.max(s.abs());
        }
    }
    verdict(worst <= 1e-8, format!("1000 pairs x 2 variants; max |sum| {worst:.3e}"))
}

fn inverse_gradient_exact() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let c = 2 + t % 19;
        let f = softmax(&normal_vec(&mut rng, c, 3.0));
        let y = softmax(&normal_vec(&mut rng, c, 3.0));
        let g = losses::classification_label_grad(&f, &y, LossVariant::KlInverse);
        for j in 0..c {
            worst = worst.max((g[j] - (y[j] - f[j])).abs());
        }
    }
    verdict(worst <= 1e-12, format!("1000 instances; max componentwise deviation {worst:.3e}"))
}

fn initialization() -> Verdict {
    let k = 10.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut details = Vec::new();
    let mut pass = true;
    for c in [2usize, 10, 100] {
        let labels: Vec<NoisyLabel> = (0..1000).map(|_| NoisyLabel(rng.random_range(0..c as u32))).collect();
        let bank = LabelBank::init_from_noisy(&labels, c, k).expect("bank");
        let bound = k.exp() / (k.exp() + c as f64 - 1.0) - 1e-9;
        let mut min_peak = f64::INFINITY;
        for (i, l) in labels.iter().enumerate() {
            let d = bank.distribution(i).expect("dist");
            let (arg, peak) = d
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(a, m), (j, &v)| if v > m { (j, v) } else { (a, m) });
            pass &= arg == l.class() && peak >= bound;
            min_peak = min_peak.min(peak);
        }
        details.push(format!("c={c} min peak {min_peak:.9} bound {bound:.9}"));
    }
    verdict(pass, details.join("; "))
}

fn noise_statistics() -> Verdict {
    let n = 10_000;
    let c = 10;
    let truth: Vec<usize> = (0..n).map(|i| i % c).collect();
    let mut pass = true;
    let mut details = Vec::new();
    for r in [0.2, 0.3, 0.5, 0.8] {
        let noisy = inject_symmetric(&truth, c, r, 7).expect("symmetric");
        let frac = noise::corruption_fraction(&truth, &noisy);
        let expected = r * (1.0 - 1.0 / c as f64);
        pass &= (frac - expected).abs() <= 0.02;
        details.push(format!("sym r={r}: {frac:.4} vs {expected:.4}"));
    }
    let noisy = inject_asym_circular(&truth, c, 0.4, 7).expect("circular");
    let successor_only = truth.iter().zip(&noisy).all(|(&t, &y)| y == t || y == (t + 1) % c);
    let frac = noise::corruption_fraction(&truth, &noisy);
    pass &= successor_only;
    details.push(format!("circular r=0.4: successor-only {successor_only}, flipped {frac:.4}"));
    verdict(pass, details.join("; "))
}

fn mechanism() -> Verdict {
    let data = blobs_task(1);
    let inverse = trainer::run(recipe(1), &data, false).expect("inverse run").report;
    let mut cfg = recipe(1);
    cfg.variant = LossVariant::KlForward;
    let forward = trainer::run(cfg, &data, false).expect("forward run").report;
    let n_train = inverse.dataset.train as f64;
    let n = data.len() as f64;
    let gain = |r: &trainer::RunReport| r.final_correct_labels.unwrap() as f64 - r.initial_correct_labels.unwrap() as f64;
    let (gi, gf) = (gain(&inverse), gain(&forward));
    let pass = gi >= 0.10 * n && gf.abs() < 0.01 * n_train;
    verdict(
        pass,
        format!(
            "inverse {} -> {} (gain {gi}, need >= {}), forward {} -> {} (change {gf}, need |.| < {})",
            inverse.initial_correct_labels.unwrap(),
            inverse.final_correct_labels.unwrap(),
            0.10 * n,
            forward.initial_correct_labels.unwrap(),
            forward.final_correct_labels.unwrap(),
            0.01 * n_train,
        ),
    )
}

fn robustness() -> Verdict {
    let mut pass = true;
    let mut details = Vec::new();
    for seed in 1..=3 {
        let data = blobs_task(seed);
        let p = trainer::run(recipe(seed), &data, false).expect("pencil").report;
        let ce = trainer::run(recipe(seed), &data, true).expect("baseline").report;
        let best = p.best.as_ref().expect("best").test_accuracy;
        let last = p.last_test_accuracy.expect("last");
        let ce_last = ce.last_test_accuracy.expect("ce last");
        pass &= (best - last).abs() <= 0.02 && last >= ce_last;
        details.push(format!("seed {seed}: best {best:.4} last {last:.4} ce last {ce_last:.4}"));
    }
    verdict(pass, details.join("; "))
}

fn repetitive() -> Verdict {
    let mut pass = true;
    let (mut once, mut thrice) = (0.0, 0.0);
    for seed in 1..=3 {
        let data = blobs_task(seed);
        let single = trainer::run(recipe(seed), &data, false).expect("single").report;
        let mut cfg = recipe(seed);
        cfg.repeat_count = 2;
        let repeated = trainer::run(cfg, &data, false).expect("repeated").report;
        pass &= repeated.repeat_starts.len() == 3 && repeated.repeat_starts.iter().all(|s| s.hard_labels_match_noisy);
        once += single.last_test_accuracy.unwrap() / 3.0;
        thrice += repeated.last_test_accuracy.unwrap() / 3.0;
    }
    pass &= thrice >= once - 0.01;
    let trend = if thrice > once { "improved" } else { "not improved" };
    verdict(
        pass,
        format!("resets observed at every repeat start: {pass}; mean last accuracy repeat_count=0 {once:.4}, repeat_count=2 {thrice:.4} ({trend}, soft)"),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = dir.path().join("blobs.csv");
    blobs_task(9).save(&data).expect("save");
    let train = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_pencil"))
            .args(["train", "--data"])
            .arg(&data)
            .arg("--out-dir")
            .arg(&out)
            .env_remove("PENCIL_SEED")
            .output()
            .expect("spawn");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("report.json")).expect("report")
    };
    let (a, b) = (train("a"), train("b"));
    verdict(a == b, format!("two train invocations, report.json {} bytes, identical {}", a.len(), a == b))
}

type Check = fn() -> Verdict;

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 9] = [
        ("gradient correctness", Duration::from_secs(10), gradient_correctness),
        ("classification gradient sums to zero", Duration::from_secs(5), zero_sum),
        ("inverse-KL label gradient is y_d - f", Duration::from_secs(60), inverse_gradient_exact),
        ("label initialization", Duration::from_secs(60), initialization),
        ("noise statistics", Duration::from_secs(60), noise_statistics),
        ("label correction mechanism", Duration::from_secs(120), mechanism),
        ("robustness against CE baseline", Duration::from_secs(300), robustness),
        ("repetitive training", Duration::from_secs(300), repetitive),
        ("determinism", Duration::from_secs(300), determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let ok = v.pass && took <= *budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {}: {name}: {} [{:.2}s, budget {}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            budget.as_secs(),
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
