//! Adversarial example generators: FGSM, PGD, and the second-order attack
//! that steps along the Krylov-approximated Newton direction H⁻¹g.
//!
//! All attacks share the same projection operator: after every step the
//! iterate is clamped back into the L∞ ball of radius ε around the
//! *original* input, intersected with the [0, 1] pixel box, so the budget
//! never drifts across iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hvp::{DifferenceScheme, HvpOperator, InputLoss};
use crate::krylov::gmres;
use crate::nn::FeedForwardModel;
use crate::tensor::Tensor;

/// Perturbation ball. Only L∞ is implemented; L2 is a config stub.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationNorm {
    #[default]
    Linf,
    L2,
}

/// Hyperparameters shared by the attacks.
///
/// `alpha` is the total step budget of the second-order attack (each of its
/// `iterations` outer steps moves by `alpha / iterations · δ̃`); `step_size`
/// is the per-iteration step of PGD. Both the paper-standard PGD settings
/// (20 iterations of 2/255 inside ε = 8/255) and the second-order defaults
/// (η = 1e-5, τ = 1e-3) are baked into `Default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// L∞ budget ε.
    pub epsilon: f64,
    /// Total second-order step size α (defaults to ε).
    pub alpha: f64,
    /// Iteration count N (PGD steps / second-order outer steps).
    pub iterations: usize,
    /// PGD per-step size.
    pub step_size: f64,
    /// Finite-difference step η for Hessian-vector products.
    pub eta: f64,
    /// Relative-residual threshold τ of the Krylov solve (0 disables it).
    pub tau: f64,
    /// Cap on the Krylov dimension.
    pub m_max: usize,
    /// Ball shape (L∞ only).
    pub norm: PerturbationNorm,
    /// L2-normalize δ̃ before stepping (off by default: the raw direction
    /// is applied as-is).
    pub normalize_direction: bool,
    /// Differencing scheme for the Hessian-vector products.
    pub scheme: DifferenceScheme,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 8.0 / 255.0,
            alpha: 8.0 / 255.0,
            iterations: 20,
            step_size: 2.0 / 255.0,
            eta: 1e-5,
            tau: 1e-3,
            m_max: 64,
            norm: PerturbationNorm::Linf,
            normalize_direction: false,
            scheme: DifferenceScheme::Forward,
        }
    }
}

impl AttackConfig {
    /// Budget-only constructor: α = ε, everything else at defaults.
    pub fn with_epsilon(epsilon: f64) -> Self {
        AttackConfig {
            epsilon,
            alpha: epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0) && self.epsilon > 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must be >= 0, got {}",
                self.tau
            )));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidConfig("m_max must be >= 1".into()));
        }
        Ok(())
    }
}

/// What one attack run produced.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    /// The perturbed input, inside the ε-ball and the [0, 1] box.
    pub adversarial: Tensor,
    /// Whether the prediction differs from the true label.
    pub success: bool,
    /// ‖x_adv − x‖∞.
    pub linf_distance: f64,
    /// Outer iterations performed.
    pub iterations_used: usize,
    /// Krylov dimension m per outer step (empty for first-order attacks).
    pub krylov_dims: Vec<usize>,
    /// Loss at the clean input followed by the loss after each outer step.
    pub loss_trace: Vec<f64>,
}

/// Componentwise projection of `candidate` into
/// `[origin − ε, origin + ε] ∩ [0, 1]`.
pub fn project(candidate: &Tensor, origin: &Tensor, epsilon: f64) -> Result<Tensor> {
    if candidate.len() != origin.len() {
        return Err(Error::ShapeMismatch {
            context: "project",
            left: candidate.shape().dims().to_vec(),
            right: origin.shape().dims().to_vec(),
        });
    }
    let data = candidate
        .as_slice()
        .iter()
        .zip(origin.as_slice())
        .map(|(&c, &o)| c.clamp(o - epsilon, o + epsilon).clamp(0.0, 1.0))
        .collect();
    Ok(Tensor::from_computed(origin.shape().clone(), data))
}

fn finish(
    model: &FeedForwardModel,
    x: &Tensor,
    y: usize,
    adversarial: Tensor,
    iterations_used: usize,
    krylov_dims: Vec<usize>,
    loss_trace: Vec<f64>,
) -> Result<AttackOutcome> {
    Ok(AttackOutcome {
        success: model.predict(&adversarial)? != y,
        linf_distance: adversarial.linf_distance(x)?,
        adversarial,
        iterations_used,
        krylov_dims,
        loss_trace,
    })
}

/// Single-step signed-gradient attack: `x + ε·sign(∇L)`, clipped to the box.
pub fn fgsm(model: &FeedForwardModel, x: &Tensor, y: usize, epsilon: f64) -> Result<AttackOutcome> {
    let clean_loss = model.loss(x, y)?;
    let g = model.input_gradient(x, y)?;
    let adv = project(&x.axpy(epsilon, &g.sign())?, x, epsilon)?;
    let adv_loss = model.loss(&adv, y)?;
    finish(model, x, y, adv, 1, Vec::new(), vec![clean_loss, adv_loss])
}

/// Iterated signed-gradient attack with projection after every step.
pub fn pgd(model: &FeedForwardModel, x: &Tensor, y: usize, config: &AttackConfig) -> Result<AttackOutcome> {
    config.validate()?;
    if config.norm != PerturbationNorm::Linf {
        return Err(Error::InvalidConfig(
            "only the L-infinity ball is implemented".into(),
        ));
    }
    let mut trace = vec![model.loss(x, y)?];
    let mut current = x.clone();
    for _ in 0..config.iterations {
        let g = model.input_gradient(&current, y)?;
        current = project(&current.axpy(config.step_size, &g.sign())?, x, config.epsilon)?;
        trace.push(model.loss(&current, y)?);
    }
    finish(model, x, y, current, config.iterations, Vec::new(), trace)
}

/// Second-order attack: at each outer step solve H δ = g in the Krylov
/// subspace at the current iterate, move by (α/N)·δ̃, and project back into
/// the ε-ball around the original input.
pub fn soae(model: &FeedForwardModel, x: &Tensor, y: usize, config: &AttackConfig) -> Result<AttackOutcome> {
    config.validate()?;
    let n = config.iterations;
    let step = config.alpha / n as f64;
    let m_cap = config.m_max.min(model.input_dim());

    let mut trace = vec![model.loss(x, y)?];
    let mut krylov_dims = Vec::with_capacity(n);
    let mut current = x.clone();
    for _ in 0..n {
        let g = model.input_gradient(&current, y)?;
        let objective = InputLoss::new(model, y);
        let op = HvpOperator::with_base_gradient(objective, current.clone(), config.eta, g.clone())?
            .with_scheme(config.scheme);
        let result = gmres(&op, &g, &g, config.tau, m_cap)?;
        krylov_dims.push(result.iterations);

        let mut direction = result.solution;
        if config.normalize_direction {
            let norm = direction.l2_norm();
            if norm > 0.0 {
                direction = direction.scale(1.0 / norm);
            }
        }
        current = project(&current.axpy(step, &direction)?, x, config.epsilon)?;
        trace.push(model.loss(&current, y)?);
    }
    finish(model, x, y, current, n, krylov_dims, trace)
}
