//! Fixtures shared by the criterion benchmarks in `benches/`.

use brixkit::{synth_generate, RasterImage, SynthConfig};

/// A deterministic textured image of the given size.
pub fn textured_image(width: usize, height: usize) -> RasterImage {
    let data = (0..width * height * 3)
        .map(|i| ((i * 2654435761usize) >> 7) as u8)
        .collect();
    RasterImage::new(width, height, data).expect("valid buffer")
}

/// Planted-linear synthetic images and labels.
pub fn planted(samples: usize, seed: u64) -> (Vec<RasterImage>, Vec<f64>) {
    let cfg = SynthConfig {
        samples,
        noise_sigma: 0.5,
        ..Default::default()
    };
    let ds = synth_generate(&cfg, seed).expect("valid synth config");
    (ds.images, ds.labels)
}
