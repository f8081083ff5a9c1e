//! Viewing-geometry driven weights for fusing per-scale quality scores.
//!
//! Each display scale covers a band of spatial frequencies `[ξ_{i-1}, ξ_i]`
//! (cycles per degree). A scale's weight is the area of the contrast
//! sensitivity curve over its band, normalised so the weights sum to one.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VqaError};

/// Quadrature step in cycles per degree.
pub const QUADRATURE_STEP: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewingEnvironment {
    /// Viewing distance, inches.
    pub viewing_distance: f64,
    /// Screen height, inches.
    pub screen_height: f64,
    /// Luminance, cd/m².
    pub luminance: f64,
    /// Angular object area, squared degrees.
    pub angular_area: f64,
    /// Vertical line count of each scale, ascending.
    pub scale_lines: Vec<u32>,
}

impl Default for ViewingEnvironment {
    fn default() -> Self {
        ViewingEnvironment {
            viewing_distance: 35.0,
            screen_height: 11.3,
            luminance: 200.0,
            angular_area: 606.0,
            scale_lines: vec![540, 720, 1080],
        }
    }
}

impl ViewingEnvironment {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("viewing_distance", self.viewing_distance),
            ("screen_height", self.screen_height),
            ("luminance", self.luminance),
            ("angular_area", self.angular_area),
        ];
        let mut problems: Vec<String> = positive
            .iter()
            .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
            .map(|(k, v)| format!("{k} must be positive, got {v}"))
            .collect();
        if self.scale_lines.is_empty() || self.scale_lines.contains(&0) {
            problems.push("scale_lines must be non-empty and positive".into());
        }
        if self.scale_lines.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("scale_lines must be strictly increasing".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(VqaError::Validation(problems))
        }
    }
}

/// Highest spatial frequency (cpd) displayable by `lines` vertical pixels on
/// a screen of height `screen_height` viewed from `distance`.
pub fn viewing_resolution_factor(distance: f64, lines: f64, screen_height: f64) -> Result<f64> {
    if !(distance > 0.0 && lines > 0.0 && screen_height > 0.0) {
        return Err(VqaError::invalid(format!(
            "viewing geometry must be positive: d={distance}, n={lines}, h={screen_height}"
        )));
    }
    Ok(PI * distance * lines / (180.0 * screen_height * 2.0))
}

/// Contrast sensitivity at frequency `u` (cpd). `S(0) = 0`.
pub fn csf(u: f64, luminance: f64, angular_area: f64) -> Result<f64> {
    if u < 0.0 || !u.is_finite() {
        return Err(VqaError::invalid(format!("spatial frequency must be ≥ 0, got {u}")));
    }
    Ok(csf_unchecked(u, luminance, angular_area))
}

fn csf_unchecked(u: f64, l: f64, x0_sq: f64) -> f64 {
    let u2 = u * u;
    let lowpass = -(-0.02 * u2).exp_m1();
    if lowpass <= 0.0 {
        return 0.0;
    }
    let num = 5200.0 * (-0.0016 * u2 * (1.0 + 100.0 / l).powf(0.08)).exp();
    let den = ((1.0 + 144.0 / x0_sq + 0.64 * u2) * (63.0 / l.powf(0.83) + 1.0 / lowpass)).sqrt();
    num / den
}

/// Composite Simpson rule on `[a, b]` with panels no wider than `step`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, step: f64) -> Result<f64> {
    if b < a || step <= 0.0 {
        return Err(VqaError::invalid(format!("bad quadrature interval [{a}, {b}] step {step}")));
    }
    if b == a {
        return Ok(0.0);
    }
    let mut n = ((b - a) / step).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    let v = acc * h / 3.0;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(VqaError::Numeric(format!(
            "quadrature on [{a}, {b}] with {n} panels produced {v}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleWeights {
    /// One weight per scale, ascending resolution; sums to 1.
    pub weights: Vec<f64>,
    /// Band edges `ξ_0 = 0, ξ_1, …`.
    pub band_edges: Vec<f64>,
}

/// Weights from the area under an arbitrary sensitivity curve.
pub fn weights_from_sensitivity<F: Fn(f64) -> f64>(band_edges: &[f64], sensitivity: F) -> Result<ScaleWeights> {
    if band_edges.len() < 2 || band_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VqaError::invalid("band edges must be strictly increasing"));
    }
    let areas = band_edges
        .windows(2)
        .map(|w| simpson(&sensitivity, w[0], w[1], QUADRATURE_STEP))
        .collect::<Result<Vec<f64>>>()?;
    let z: f64 = areas.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(VqaError::Numeric(format!(
            "sensitivity area {z} over edges {band_edges:?} cannot be normalised"
        )));
    }
    Ok(ScaleWeights {
        weights: areas.iter().map(|a| a / z).collect(),
        band_edges: band_edges.to_vec(),
    })
}

pub fn band_edges(env: &ViewingEnvironment) -> Result<Vec<f64>> {
    let mut edges = vec![0.0];
    for &n in &env.scale_lines {
        edges.push(viewing_resolution_factor(env.viewing_distance, n as f64, env.screen_height)?);
    }
    Ok(edges)
}

pub fn scale_weights(env: &ViewingEnvironment) -> Result<ScaleWeights> {
    env.validate()?;
    let edges = band_edges(env)?;
    let (l, x) = (env.luminance, env.angular_area);
    weights_from_sensitivity(&edges, |u| csf_unchecked(u, l, x))
}

/// Weighted geometric mean `Π Q_i^{w_i}`. Scores must be positive.
pub fn fuse_multiscale(scores: &[f64], weights: &ScaleWeights) -> Result<f64> {
    if scores.len() != weights.weights.len() {
        return Err(VqaError::invalid(format!(
            "{} scores for {} weights",
            scores.len(),
            weights.weights.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|&&q| !(q > 0.0 && q.is_finite())) {
        return Err(VqaError::Domain(format!(
            "multi-scale fusion needs positive scores, got {bad}; shift scores into a positive range first"
        )));
    }
    Ok(scores
        .iter()
        .zip(&weights.weights)
        .map(|(q, w)| w * q.ln())
        .sum::<f64>()
        .exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_factor_values() {
        let a = viewing_resolution_factor(35.0, 540.0, 11.3).unwrap();
        let b = viewing_resolution_factor(35.0, 1080.0, 11.3).unwrap();
        assert!((a - 14.5959).abs() < 1e-3);
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(viewing_resolution_factor(35.0, 1e-12, 11.3).unwrap() < 1e-9);
        assert!(viewing_resolution_factor(0.0, 540.0, 11.3).is_err());
    }

    #[test]
    fn csf_zero_and_negative() {
        assert_eq!(csf(0.0, 200.0, 606.0).unwrap(), 0.0);
        assert!(csf(1e-9, 200.0, 606.0).unwrap() < 1e-3);
        assert!(csf(-1.0, 200.0, 606.0).is_err());
    }

    #[test]
    fn csf_direct_formula() {
        // Independent evaluation with the textbook form, 1 - exp rather than expm1.
        let (u, l, x): (f64, f64, f64) = (4.0, 200.0, 606.0);
        let num = 5200.0 * (-0.0016 * u * u * (1.0 + 100.0 / l).powf(0.08)).exp();
        let den = ((1.0 + 144.0 / x + 0.64 * u * u)
            * (63.0 / l.powf(0.83) + 1.0 / (1.0 - (-0.02 * u * u).exp())))
        .sqrt();
        let expected = num / den;
        let got = csf(u, l, x).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-6);
        assert!((got - 710.4615).abs() < 1e-3);
    }

    #[test]
    fn csf_unimodal() {
        let samples: Vec<f64> = (0..=6000).map(|k| csf(k as f64 * 0.01, 200.0, 606.0).unwrap()).collect();
        let peak = samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(peak > 0 && peak < samples.len() - 1);
        assert!(samples[..=peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(samples[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn flat_sensitivity_equal_bands() {
        let w = weights_from_sensitivity(&[0.0, 1.0, 2.0, 3.0], |_| 1.0).unwrap();
        for v in &w.weights {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 3.0, 0.5).unwrap();
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn fusion_examples() {
        let w = ScaleWeights {
            weights: vec![0.5, 0.25, 0.25],
            band_edges: vec![0.0, 1.0, 2.0, 3.0],
        };
        let q = fuse_multiscale(&[2.0, 4.0, 8.0], &w).unwrap();
        let expected = 2f64.powf(0.5) * 4f64.powf(0.25) * 8f64.powf(0.25);
        assert!((q - expected).abs() < 1e-12);
        assert!((q - 3.3636).abs() < 1e-4);
        assert!((fuse_multiscale(&[4.0; 3], &w).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(
            fuse_multiscale(&[1.0, 0.0, 2.0], &w),
            Err(VqaError::Domain(_))
        ));
        assert!(fuse_multiscale(&[1.0, 2.0], &w).is_err());
    }

    #[test]
    fn invalid_environment() {
        let env = ViewingEnvironment {
            scale_lines: vec![720, 540],
            ..Default::default()
        };
        assert!(scale_weights(&env).is_err());
        let env = ViewingEnvironment {
            luminance: -1.0,
            ..Default::default()
        };
        assert!(matches!(scale_weights(&env), Err(VqaError::Validation(_))));
    }
}
