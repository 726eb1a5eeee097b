//! Evaluation metrics: accuracy, PSNR, and a uniform-window SSIM.
//!
//! SSIM uses 8×8 uniform windows at stride 1 with the usual stabilizers
//! c1 = (0.01·peak)², c2 = (0.03·peak)²; PSNR assumes peak 1.0 since pixels
//! live in [0, 1]. Published PSNR/SSIM tables rarely state their scaling
//! conventions, so treat absolute values as implementation-defined and
//! compare only within one implementation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::FeedForwardModel;
use crate::tensor::Tensor;

/// Default SSIM window side.
pub const SSIM_WINDOW: usize = 8;
/// Default SSIM stabilizers for peak 1.0.
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Aggregate evaluation numbers for one model/dataset pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub clean_accuracy: f64,
    /// Robust accuracy per attack name.
    pub robust_accuracy: BTreeMap<String, f64>,
    /// Mean PSNR in dB over finite values (None when no pair qualified).
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub n_examples: usize,
}

/// Fraction of examples the model classifies correctly.
pub fn accuracy(model: &FeedForwardModel, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut correct = 0usize;
    for ex in &dataset.examples {
        if model.predict(&ex.x)? == ex.y {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Peak signal-to-noise ratio; identical inputs have no finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    /// MSE is exactly zero.
    Infinite,
}

impl Psnr {
    pub fn as_db(self) -> Option<f64> {
        match self {
            Psnr::Db(v) => Some(v),
            Psnr::Infinite => None,
        }
    }
}

/// PSNR = 10·log10(peak² / MSE).
pub fn psnr(original: &Tensor, perturbed: &Tensor, peak: f64) -> Result<Psnr> {
    if original.len() != perturbed.len() {
        return Err(Error::ShapeMismatch {
            context: "psnr",
            left: original.shape().dims().to_vec(),
            right: perturbed.shape().dims().to_vec(),
        });
    }
    let mse: f64 = original
        .as_slice()
        .iter()
        .zip(perturbed.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / original.len() as f64;
    if mse == 0.0 {
        return Ok(Psnr::Infinite);
    }
    Ok(Psnr::Db(10.0 * (peak * peak / mse).log10()))
}

/// Side length of a square image tensor: either the declared 2-D shape or
/// the square root of a flat length.
fn square_side(t: &Tensor) -> Result<usize> {
    let dims = t.shape().dims();
    if dims.len() == 2 && dims[0] == dims[1] {
        return Ok(dims[0]);
    }
    let side = (t.len() as f64).sqrt().round() as usize;
    if side * side != t.len() {
        return Err(Error::InvalidShape(format!(
            "SSIM needs a square image, got shape {dims:?}"
        )));
    }
    Ok(side)
}

/// Mean local SSIM over uniform `window`×`window` patches at stride 1.
pub fn ssim(
    original: &Tensor,
    perturbed: &Tensor,
    window: usize,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if original.len() != perturbed.len() {
        return Err(Error::ShapeMismatch {
            context: "ssim",
            left: original.shape().dims().to_vec(),
            right: perturbed.shape().dims().to_vec(),
        });
    }
    let side = square_side(original)?;
    if side < window || window == 0 {
        return Err(Error::InvalidShape(format!(
            "image side {side} is smaller than the SSIM window {window}"
        )));
    }
    let a = original.as_slice();
    let b = perturbed.as_slice();
    let n = (window * window) as f64;
    let span = side - window + 1;
    let mut total = 0.0;
    for top in 0..span {
        for left in 0..span {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in 0..window {
                let base = (top + r) * side + left;
                for c in 0..window {
                    let (x, y) = (a[base + c], b[base + c]);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (mu_a, mu_b) = (sa / n, sb / n);
            let var_a = saa / n - mu_a * mu_a;
            let var_b = sbb / n - mu_b * mu_b;
            let cov = sab / n - mu_a * mu_b;
            total += (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    Ok(total / (span * span) as f64)
}

/// [`ssim`] with the default window and stabilizers.
pub fn ssim_default(original: &Tensor, perturbed: &Tensor) -> Result<f64> {
    ssim(original, perturbed, SSIM_WINDOW, SSIM_C1, SSIM_C2)
}
