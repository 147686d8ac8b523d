//! Synthetic patch generator.
//!
//! Stands in for restricted clinical data: a pale tissue-like background
//! with seeded elliptical clusters of a darker "malignant" color family.
//! The regression label is the exact fraction of pixels covered by the
//! ellipse union, counted from the generator's own coverage mask, so the
//! label is learnable from color alone and verifiable to the last pixel.

use std::path::Path;

use rand::Rng as _;

use crate::imgio::{write_ppm, Patch};
use crate::seeds;

use super::{Manifest, ManifestRow, PipelineError};

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    /// Rotation of the major axis, radians.
    pub rot: f64,
    pub color: [u8; 3],
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let (s, c) = self.rot.sin_cos();
        let u = (c * dx + s * dy) / self.rx;
        let v = (-s * dx + c * dy) / self.ry;
        u * u + v * v <= 1.0
    }
}

/// Render one patch. Returns the image and its coverage label
/// (covered pixels / total pixels, exact).
pub fn render_synthetic_patch(size: usize, ellipses: &[Ellipse], bg_seed: u64) -> (Patch, f64) {
    let mut rng = seeds::rng(bg_seed);
    let base = [228i32, 205, 214];
    let mut data = Vec::with_capacity(size * size * 3);
    let mut covered = 0usize;
    for y in 0..size {
        for x in 0..size {
            let hit = ellipses.iter().find(|e| e.contains(x as f64, y as f64));
            match hit {
                Some(e) => {
                    covered += 1;
                    for c in 0..3 {
                        let noise = rng.random_range(-8i32..=8);
                        data.push((i32::from(e.color[c]) + noise).clamp(0, 255) as u8);
                    }
                }
                None => {
                    for &b in &base {
                        let noise = rng.random_range(-10i32..=10);
                        data.push((b + noise).clamp(0, 255) as u8);
                    }
                }
            }
        }
    }
    let patch = Patch::new(size, size, data).expect("size >= 1");
    (patch, covered as f64 / (size * size) as f64)
}

fn sample_ellipses(size: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Ellipse> {
    let s = size as f64;
    let count = rng.random_range(0..=5u32);
    let mut ellipses = Vec::new();
    for _ in 0..count {
        let large = rng.random::<f64>() < 0.15;
        let (lo, hi) = if large { (s / 3.0, s / 2.0) } else { (s / 12.0, s / 4.0) };
        ellipses.push(Ellipse {
            cx: rng.random_range(0.0..s),
            cy: rng.random_range(0.0..s),
            rx: rng.random_range(lo..hi),
            ry: rng.random_range(lo..hi),
            rot: rng.random_range(0.0..std::f64::consts::PI),
            color: [
                rng.random_range(100..=150),
                rng.random_range(45..=85),
                rng.random_range(135..=185),
            ],
        });
    }
    ellipses
}

/// Generate `n` labelled patches plus their manifest rows in `out_dir`.
/// Fully deterministic in (n, image_size, seed).
pub fn generate_synthetic_dataset(
    n: usize,
    image_size: usize,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest, PipelineError> {
    if n == 0 {
        return Err(PipelineError::Invalid("need at least 1 image".into()));
    }
    if image_size == 0 {
        return Err(PipelineError::Invalid("image size must be >= 1".into()));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = seeds::rng(seeds::derive_indexed(seed, "synth", i as u64));
        let ellipses = sample_ellipses(image_size, &mut rng);
        let bg_seed = seeds::derive_indexed(seed, "synth-noise", i as u64);
        let (patch, label) = render_synthetic_patch(image_size, &ellipses, bg_seed);
        let id = format!("synth_{i:05}");
        let file = out_dir.join(format!("{id}.ppm"));
        write_ppm(&patch, &file)?;
        rows.push(ManifestRow {
            id,
            image_path: file,
            labels: vec![label],
        });
    }
    Ok(Manifest { rows })
}
