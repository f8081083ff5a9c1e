//! Procedural clips with controlled degradations and a known quality label.
//!
//! Content is a few drifting colour gratings plus moving discs under a slow
//! camera pan. Each clip is degraded by Gaussian blur (`blur`, pixels),
//! additive Gaussian noise (`noise`, 8-bit code values) and per-frame camera
//! shake (`jitter`, pixels). The label is
//!
//! ```text
//! D   = 0.5·blur + 0.04·noise + 0.1·jitter
//! MOS = 1 + 4·exp(−D)
//! ```
//!
//! which is 5 for a pristine clip and strictly decreasing in each factor.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_manifest, DatasetManifest, ManifestRecord};
use crate::error::{Result, VqaError};
use crate::image::Image;
use crate::video::write_y4m;

pub const MOS_MAX: f64 = 5.0;
pub const MOS_MIN: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub blur: f64,
    pub noise: f64,
    pub jitter: f64,
}

pub fn degradation_index(d: &Degradation) -> f64 {
    0.5 * d.blur + 0.04 * d.noise + 0.1 * d.jitter
}

pub fn oracle_mos(d: &Degradation) -> f64 {
    MOS_MIN + (MOS_MAX - MOS_MIN) * (-degradation_index(d)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthProfile {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frame_rate: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub blur_max: f64,
    pub noise_max: f64,
    pub jitter_max: f64,
}

impl SynthProfile {
    /// Small clips for fast end-to-end runs.
    pub fn stub() -> Self {
        SynthProfile {
            name: "synthetic-stub".into(),
            width: 88,
            height: 64,
            frame_rate: 8.0,
            min_frames: 48,
            max_frames: 96,
            blur_max: 3.0,
            noise_max: 20.0,
            jitter_max: 4.0,
        }
    }

    /// A second "database": other geometry and wider degradation ranges.
    pub fn shifted() -> Self {
        SynthProfile {
            name: "synthetic-shifted".into(),
            width: 112,
            height: 72,
            frame_rate: 10.0,
            min_frames: 50,
            max_frames: 90,
            blur_max: 4.0,
            noise_max: 28.0,
            jitter_max: 6.0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "stub" | "synthetic-stub" => Ok(Self::stub()),
            "shifted" | "synthetic-shifted" => Ok(Self::shifted()),
            other => Err(VqaError::Config(format!("unknown synthetic profile '{other}'"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width < 4 || self.height < 4 || self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(VqaError::Config(format!("invalid synthetic profile {self:?}")));
        }
        if !(self.frame_rate > 0.0) || self.blur_max < 0.0 || self.noise_max < 0.0 || self.jitter_max < 0.0 {
            return Err(VqaError::Config(format!("invalid synthetic profile {self:?}")));
        }
        Ok(())
    }
}

struct Grating {
    fx: f64,
    fy: f64,
    phase: f64,
    drift: f64,
    colour: [f64; 3],
}

struct Disc {
    cx: f64,
    cy: f64,
    radius: f64,
    vx: f64,
    vy: f64,
    colour: [f64; 3],
}

struct Scene {
    gratings: Vec<Grating>,
    discs: Vec<Disc>,
    pan: (f64, f64),
    base: [f64; 3],
}

impl Scene {
    fn random(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Self {
        let colour = |rng: &mut ChaCha8Rng| [0; 3].map(|_| rng.random_range(0.2..1.0));
        let gratings = (0..3)
            .map(|_| {
                let f = rng.random_range(0.05..0.2);
                let theta = rng.random_range(0.0..TAU);
                Grating {
                    fx: f * theta.cos(),
                    fy: f * theta.sin(),
                    phase: rng.random_range(0.0..TAU),
                    drift: rng.random_range(-0.3..0.3),
                    colour: colour(rng),
                }
            })
            .collect();
        let discs = (0..4)
            .map(|_| Disc {
                cx: rng.random_range(0.0..width as f64),
                cy: rng.random_range(0.0..height as f64),
                radius: rng.random_range(4.0..12.0),
                vx: rng.random_range(-1.0..1.0),
                vy: rng.random_range(-1.0..1.0),
                colour: colour(rng),
            })
            .collect();
        Scene {
            gratings,
            discs,
            pan: (rng.random_range(-0.8..0.8), rng.random_range(-0.5..0.5)),
            base: [0; 3].map(|_| rng.random_range(0.35..0.65)),
        }
    }

    fn render(&self, width: usize, height: usize, t: f64, offset: (f64, f64)) -> Image {
        let mut img = Image::new(3, height, width);
        let n = width * height;
        for y in 0..height {
            for x in 0..width {
                let wx = x as f64 + self.pan.0 * t + offset.0;
                let wy = y as f64 + self.pan.1 * t + offset.1;
                let mut px = self.base;
                for g in &self.gratings {
                    let v = 0.12 * (TAU * (g.fx * wx + g.fy * wy) + g.phase + g.drift * t).sin();
                    for c in 0..3 {
                        px[c] += v * g.colour[c];
                    }
                }
                for d in &self.discs {
                    let dx = wx - (d.cx + d.vx * t);
                    let dy = wy - (d.cy + d.vy * t);
                    if dx * dx + dy * dy <= d.radius * d.radius {
                        px = d.colour;
                    }
                }
                for c in 0..3 {
                    img.data[c * n + y * width + x] = px[c].clamp(0.0, 1.0) as f32;
                }
            }
        }
        img
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| (v / s) as f32).collect()
}

/// Separable Gaussian blur with clamped borders.
fn blur(img: &Image, sigma: f64) -> Image {
    if sigma < 0.05 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (h, w) = (img.height as isize, img.width as isize);
    let mut tmp = img.clone();
    for c in 0..img.channels {
        let src = img.plane(c);
        let dst = tmp.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    let xx = (x + j as isize - r).clamp(0, w - 1);
                    acc += kv * src[(y * w + xx) as usize];
                }
                dst[(y * w + x) as usize] = acc;
            }
        }
    }
    let mut out = tmp.clone();
    for c in 0..img.channels {
        let src = tmp.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    let yy = (y + j as isize - r).clamp(0, h - 1);
                    acc += kv * src[(yy * w + x) as usize];
                }
                dst[(y * w + x) as usize] = acc;
            }
        }
    }
    out
}

/// Render one degraded clip. Deterministic in `seed`.
pub fn render_clip(
    width: usize,
    height: usize,
    frames: usize,
    degradation: &Degradation,
    seed: u64,
) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = Scene::random(&mut rng, width, height);
    let noise = (degradation.noise > 0.0)
        .then(|| Normal::new(0.0, degradation.noise / 255.0).expect("valid normal"));
    (0..frames)
        .map(|t| {
            let offset = if degradation.jitter > 0.0 {
                let j = degradation.jitter;
                (rng.random_range(-j..=j), rng.random_range(-j..=j))
            } else {
                (0.0, 0.0)
            };
            let clean = scene.render(width, height, t as f64, offset);
            let mut frame = blur(&clean, degradation.blur);
            if let Some(n) = &noise {
                for v in frame.data.iter_mut() {
                    *v = (*v as f64 + n.sample(&mut rng)).clamp(0.0, 1.0) as f32;
                }
            }
            frame
        })
        .collect()
}

fn clip_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Write `n_videos` clips and `manifest.tsv` into `out_dir`.
pub fn synthesize_dataset(
    out_dir: &Path,
    n_videos: usize,
    seed: u64,
    profile: &SynthProfile,
) -> Result<DatasetManifest> {
    if n_videos < 2 {
        return Err(VqaError::invalid("need at least two synthetic videos"));
    }
    profile.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| VqaError::io(out_dir, e))?;

    let plans: Vec<(usize, Degradation, usize, u64)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_videos)
            .map(|i| {
                let d = Degradation {
                    blur: rng.random_range(0.0..=profile.blur_max),
                    noise: rng.random_range(0.0..=profile.noise_max),
                    jitter: rng.random_range(0.0..=profile.jitter_max),
                };
                let frames = rng.random_range(profile.min_frames..=profile.max_frames);
                (i, d, frames, clip_seed(seed, i))
            })
            .collect()
    };

    let records = plans
        .par_iter()
        .map(|&(i, d, frames, clip)| {
            let uri = format!("clip_{i:04}.y4m");
            let video = render_clip(profile.width, profile.height, frames, &d, clip);
            write_y4m(&out_dir.join(&uri), &video, profile.frame_rate)?;
            let mut extras = BTreeMap::new();
            extras.insert("blur".to_string(), d.blur.to_string());
            extras.insert("noise".to_string(), d.noise.to_string());
            extras.insert("jitter".to_string(), d.jitter.to_string());
            Ok(ManifestRecord {
                uri,
                mos: oracle_mos(&d),
                mos_std: None,
                width: profile.width,
                height: profile.height,
                duration: frames as f64 / profile.frame_rate,
                extras,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest {
        name: profile.name.clone(),
        records,
        base_dir: out_dir.to_path_buf(),
    };
    write_manifest(&manifest, &out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}
