#![allow(dead_code)]

use brixkit::data::{AtomicSplit, ImageFormat, SampleRecord};
use brixkit::{DatasetSplit, PreparedSplit, Resolution, SplitName, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimizes ||yc - Z w||² + λ||w||² over independently standardized
/// features by accelerated gradient descent. Returns (weights, intercept).
pub fn descent_ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let d = x[0].len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let mut z = vec![vec![0.0; d]; n];
    for j in 0..d {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let s = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            z[i][j] = (x[i][j] - m) / s;
        }
    }
    let grad = |w: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = (0..n)
            .map(|i| z[i].iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - yc[i])
            .collect();
        (0..d)
            .map(|j| 2.0 * ((0..n).map(|i| z[i][j] * r[i]).sum::<f64>() + lambda * w[j]))
            .collect()
    };
    let trace: f64 = z.iter().flatten().map(|v| v * v).sum();
    let l = 2.0 * (trace + lambda);
    let mu = 2.0 * lambda;
    let q = (l / mu).sqrt();
    let beta = (q - 1.0) / (q + 1.0);
    let mut w = vec![0.0; d];
    let mut v = w.clone();
    for _ in 0..2_000_000 {
        let g = grad(&v);
        let next: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - b / l).collect();
        v = next.iter().zip(&w).map(|(a, b)| a + beta * (a - b)).collect();
        w = next;
        if grad(&w).iter().all(|g| g.abs() < 1e-11) {
            break;
        }
    }
    (w, ybar)
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rng.random_range(2..=30);
    let d = rng.random_range(1..=30);
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..10.0)).collect();
    let x = (0..n)
        .map(|_| scales.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(9.0..26.0)).collect();
    (x, y)
}

fn record(id: String, split: AtomicSplit, device: &str, format: ImageFormat, brix: f64) -> SampleRecord {
    SampleRecord {
        sample_id: id,
        image_path: String::new(),
        atomic_split: split,
        year: if (split as u8) < (AtomicSplit::E as u8) {
            2021
        } else {
            2022
        },
        device: device.into(),
        image_format: format,
        brix_top: None,
        brix_mid: None,
        brix_bot: None,
        brix_mean: brix,
        color_class: None,
        gray_card: false,
    }
}

/// A manifest with the per-atomic-split image counts of the published dataset.
pub fn published_layout() -> Vec<SampleRecord> {
    use AtomicSplit::*;
    use ImageFormat::*;
    // (atomic split, device, format, count)
    let groups: &[(AtomicSplit, &str, ImageFormat, usize)] = &[
        (A, "motog8", Jpg, 100),
        (B, "motog8", RawWb, 38),
        (B, "reflex", RawWb, 38),
        (C, "motog8", Jpg, 62),
        (C, "motog8", RawWb, 62),
        (C, "reflex", RawWb, 62),
        (D, "motog8", Jpg, 50),
        (D, "motog8", RawWb, 50),
        (D, "reflex", RawWb, 50),
        (E, "realme", Jpg, 2),
        (F, "realme", Jpg, 22),
        (F, "realme", RawWb, 22),
        (F, "d435i", Jpg, 22),
        (G, "realme", Jpg, 2),
        (H, "realme", Jpg, 19),
        (H, "realme", RawWb, 19),
        (H, "d435i", Jpg, 19),
        (I, "motog8", Jpg, 51),
        (I, "motog8", RawWb, 51),
        (I, "d435i", Jpg, 51),
    ];
    let mut out = Vec::new();
    for (split, device, format, count) in groups {
        for k in 0..*count {
            let id = format!("{split}-{device}-{}-{k}", format.as_str());
            out.push(record(id, *split, device, *format, 17.0));
        }
    }
    out
}

/// Synthetic planted dataset wrapped as a prepared split. The last `n_test`
/// samples form the test set.
pub fn planted_split(
    cfg: &SynthConfig,
    seed: u64,
    n_test: usize,
    name: SplitName,
    resolutions: &[Resolution],
) -> PreparedSplit {
    let ds = brixkit::synth_generate(cfg, seed).unwrap();
    let recs: Vec<SampleRecord> = ds
        .labels
        .iter()
        .enumerate()
        .map(|(k, &b)| record(format!("syn{k:04}"), AtomicSplit::C, "motog8", ImageFormat::Jpg, b))
        .collect();
    let n_train = recs.len() - n_test;
    let split = DatasetSplit {
        name,
        train: recs[..n_train].to_vec(),
        test: recs[n_train..].to_vec(),
    };
    PreparedSplit::from_images(split, &ds.images[..n_train], &ds.images[n_train..], resolutions).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
