//! Correlation criteria: SRCC, PLCC (raw and after a four-parameter
//! logistic mapping) and the median over repeated splits.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VqaError};

const MAX_ITERATIONS: usize = 500;
/// Width of the near-linear logistic candidate, in units of std(objective).
const LINEAR_LIMIT_WIDTH: f64 = 1e4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub srcc: f64,
    pub plcc_raw: f64,
    pub plcc_fitted: f64,
    pub logistic_params: [f64; 4],
    pub n_samples: usize,
    /// Set when the logistic fit failed and `plcc_fitted` is the raw PLCC.
    pub fit_fallback: bool,
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(VqaError::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min {
        return Err(VqaError::invalid(format!("need at least {min} samples, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(VqaError::invalid("non-finite sample"));
    }
    Ok(())
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(VqaError::UndefinedCorrelation("an input is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties receiving the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    pearson_unchecked(x, y)
}

pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    pearson_unchecked(&average_ranks(x), &average_ranks(y))
}

/// `β₂ + (β₁ − β₂) / (1 + exp(−(o − β₃)/β₄))`
pub fn logistic(o: f64, b: &[f64; 4]) -> f64 {
    b[1] + (b[0] - b[1]) / (1.0 + (-(o - b[2]) / b[3]).exp())
}

fn sse(o: &[f64], s: &[f64], b: &[f64; 4]) -> f64 {
    o.iter().zip(s).map(|(&x, &y)| (y - logistic(x, b)).powi(2)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit {
    pub params: [f64; 4],
    pub sse: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn levenberg_marquardt(o: &[f64], s: &[f64], init: [f64; 4]) -> LogisticFit {
    let mut b = init;
    let mut cost = sse(o, s, &b);
    let mut mu = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&x, &y) in o.iter().zip(s) {
            let z = (x - b[2]) / b[3];
            let sig = 1.0 / (1.0 + (-z).exp());
            let ds = (b[0] - b[1]) * sig * (1.0 - sig);
            let j = Vector4::new(sig, 1.0 - sig, -ds / b[3], -ds * z / b[3]);
            let r = y - logistic(x, &b);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let cand = [b[0] + step[0], b[1] + step[1], b[2] + step[2], b[3] + step[3]];
            let c = sse(o, s, &cand);
            if c.is_finite() && c < cost && cand[3] != 0.0 {
                let rel = (cost - c) / cost.max(1e-300);
                b = cand;
                cost = c;
                mu = (mu / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-15 {
                    return LogisticFit { params: b, sse: cost };
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    LogisticFit { params: b, sse: cost }
}

/// Least-squares logistic mapping from objective to subjective scores.
///
/// Starts from `β₁ = max(s), β₂ = min(s), β₃ = mean(o), β₄ = std(o)/4`. A
/// second start sits on the family's near-linear limit (the least-squares
/// line expressed as a very wide logistic); the lower-residual fit wins.
pub fn fit_logistic(objective: &[f64], subjective: &[f64]) -> Result<LogisticFit> {
    check_pair(objective, subjective, 5)?;
    let (om, osd) = mean_std(objective);
    let (sm, ssd) = mean_std(subjective);
    if osd == 0.0 || ssd == 0.0 {
        return Err(VqaError::UndefinedCorrelation("an input is constant".into()));
    }
    let smax = subjective.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let smin = subjective.iter().cloned().fold(f64::INFINITY, f64::min);
    let standard = levenberg_marquardt(objective, subjective, [smax, smin, om, osd / 4.0]);

    let cov = objective
        .iter()
        .zip(subjective)
        .map(|(x, y)| (x - om) * (y - sm))
        .sum::<f64>()
        / objective.len() as f64;
    let slope = cov / (osd * osd);
    let width = LINEAR_LIMIT_WIDTH * osd;
    let span = 4.0 * slope * width;
    let low = sm - span / 2.0;
    let linear = levenberg_marquardt(objective, subjective, [low + span, low, om, width]);

    let best = [standard, linear]
        .into_iter()
        .filter(|f| f.sse.is_finite() && f.params.iter().all(|p| p.is_finite()))
        .min_by(|a, b| a.sse.total_cmp(&b.sse))
        .ok_or_else(|| VqaError::Numeric("logistic fit diverged".into()))?;
    Ok(best)
}

/// Pearson correlation, optionally after the logistic mapping of `x`.
pub fn plcc(x: &[f64], y: &[f64], fitted: bool) -> Result<f64> {
    if !fitted {
        return pearson(x, y);
    }
    let fit = fit_logistic(x, y)?;
    let mapped: Vec<f64> = x.iter().map(|&o| logistic(o, &fit.params)).collect();
    pearson_unchecked(&mapped, y)
}

/// All criteria for one set of predictions.
pub fn evaluate(predicted: &[f64], mos: &[f64]) -> Result<EvalResult> {
    let srcc_v = srcc(predicted, mos)?;
    let raw = pearson(predicted, mos)?;
    let (fitted, params, fallback) = match fit_logistic(predicted, mos).and_then(|fit| {
        let mapped: Vec<f64> = predicted.iter().map(|&o| logistic(o, &fit.params)).collect();
        Ok((pearson_unchecked(&mapped, mos)?, fit.params))
    }) {
        Ok((v, p)) => (v, p, false),
        Err(e) => {
            log::warn!("logistic mapping failed ({e}); reporting raw PLCC");
            (raw, [f64::NAN; 4], true)
        }
    };
    Ok(EvalResult {
        srcc: srcc_v,
        plcc_raw: raw,
        plcc_fitted: fitted,
        logistic_params: params,
        n_samples: predicted.len(),
        fit_fallback: fallback,
    })
}

/// Median with the mean-of-middle-two convention for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn median_over_splits(results: &[EvalResult]) -> Result<EvalResult> {
    if results.is_empty() {
        return Err(VqaError::invalid("no split results to aggregate"));
    }
    let pick = |f: fn(&EvalResult) -> f64| median(&results.iter().map(f).collect::<Vec<_>>());
    let mut params = [0.0; 4];
    for (k, p) in params.iter_mut().enumerate() {
        *p = median(&results.iter().map(|r| r.logistic_params[k]).collect::<Vec<_>>());
    }
    Ok(EvalResult {
        srcc: pick(|r| r.srcc),
        plcc_raw: pick(|r| r.plcc_raw),
        plcc_fitted: pick(|r| r.plcc_fitted),
        logistic_params: params,
        n_samples: median(&results.iter().map(|r| r.n_samples as f64).collect::<Vec<_>>()).round()
            as usize,
        fit_fallback: results.iter().any(|r| r.fit_fallback),
    })
}
