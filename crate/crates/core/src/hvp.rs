//! Matrix-free Hessian-vector products by finite differences of gradients.
//!
//! `H·v ≈ (∇L(x + ηv) − ∇L(x)) / η` — one fresh gradient evaluation per
//! product, with the base gradient ∇L(x) computed once per operator and
//! cached. This is the only access the solver has to the Hessian.
//!
//! The probe direction is *not* normalized before differencing, so the
//! effective step is η‖v‖; the Arnoldi loop only ever feeds unit vectors,
//! which leaves the initial H·g product as the one place a large gradient
//! norm inflates the step.

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::nn::FeedForwardModel;
use crate::tensor::Tensor;

/// A scalar objective exposing its gradient; the loss landscape the
/// operator differentiates through.
pub trait Objective {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &Tensor) -> Result<Tensor>;
}

/// Cross-entropy loss of a fixed model at a fixed label, as a function of
/// the input.
#[derive(Debug, Clone, Copy)]
pub struct InputLoss<'a> {
    model: &'a FeedForwardModel,
    label: usize,
}

impl<'a> InputLoss<'a> {
    pub fn new(model: &'a FeedForwardModel, label: usize) -> Self {
        InputLoss { model, label }
    }

    pub fn loss(&self, x: &Tensor) -> Result<f64> {
        self.model.loss(x, self.label)
    }
}

impl Objective for InputLoss<'_> {
    fn dim(&self) -> usize {
        self.model.input_dim()
    }

    fn gradient(&self, x: &Tensor) -> Result<Tensor> {
        self.model.input_gradient(x, self.label)
    }
}

/// Differencing scheme for the product. Forward is the default; central
/// costs a second gradient per product and exists for accuracy studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifferenceScheme {
    #[default]
    Forward,
    Central,
}

/// Finite-difference Hessian-vector operator at a fixed base point.
/// Read-only after construction; concurrent `apply` calls are safe.
pub struct HvpOperator<F: Objective> {
    objective: F,
    base_point: Tensor,
    eta: f64,
    scheme: DifferenceScheme,
    base_gradient: Tensor,
}

impl<F: Objective> HvpOperator<F> {
    /// Build the operator, evaluating and caching ∇L at the base point.
    pub fn new(objective: F, base_point: Tensor, eta: f64) -> Result<Self> {
        let g = objective.gradient(&base_point)?;
        Self::with_base_gradient(objective, base_point, eta, g)
    }

    /// Build the operator reusing an already-computed base gradient.
    pub fn with_base_gradient(
        objective: F,
        base_point: Tensor,
        eta: f64,
        base_gradient: Tensor,
    ) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "difference step eta must be positive and finite, got {eta}"
            )));
        }
        if base_point.len() != objective.dim() {
            return Err(Error::DimensionMismatch {
                expected: objective.dim(),
                got: base_point.len(),
            });
        }
        Ok(HvpOperator {
            objective,
            base_point,
            eta,
            scheme: DifferenceScheme::Forward,
            base_gradient,
        })
    }

    pub fn with_scheme(mut self, scheme: DifferenceScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn base_gradient(&self) -> &Tensor {
        &self.base_gradient
    }

    /// H·v by gradient differencing.
    pub fn apply_hvp(&self, v: &Tensor) -> Result<Tensor> {
        match self.scheme {
            DifferenceScheme::Forward => {
                let shifted = self.base_point.axpy(self.eta, v)?;
                let g_shifted = self.objective.gradient(&shifted)?;
                Ok(g_shifted.sub(&self.base_gradient)?.scale(1.0 / self.eta))
            }
            DifferenceScheme::Central => {
                let plus = self.objective.gradient(&self.base_point.axpy(self.eta, v)?)?;
                let minus = self
                    .objective
                    .gradient(&self.base_point.axpy(-self.eta, v)?)?;
                Ok(plus.sub(&minus)?.scale(1.0 / (2.0 * self.eta)))
            }
        }
    }

    /// Hᵏ·v by k nested products, one gradient evaluation each.
    pub fn apply_power(&self, v: &Tensor, k: usize) -> Result<Tensor> {
        if k == 0 {
            return Err(Error::InvalidConfig("power k must be >= 1".into()));
        }
        let mut out = self.apply_hvp(v)?;
        for _ in 1..k {
            out = self.apply_hvp(&out)?;
        }
        Ok(out)
    }
}

impl<F: Objective> LinearOperator for HvpOperator<F> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn apply(&self, v: &Tensor) -> Result<Tensor> {
        self.apply_hvp(v)
    }
}
