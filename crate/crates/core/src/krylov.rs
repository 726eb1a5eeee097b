//! Matrix-free GMRES: Arnoldi orthogonalization with modified Gram-Schmidt,
//! a recursive Givens QR of the Hessenberg matrix, residual tracking against
//! a relative threshold, and the final upper-triangular solve.
//!
//! The solver never forms the operator; it only calls `apply`. The
//! least-squares problem `min ‖β e₁ − D_{m+1,m} γ‖₂` is solved incrementally:
//! each new Hessenberg column gets the accumulated plane rotations plus one
//! new rotation annihilating its subdiagonal entry, and the rotated
//! right-hand side's trailing entry is the residual norm — no basis change
//! or explicit Q is ever materialized.

use crate::error::{Error, Result};
use crate::hvp::{HvpOperator, InputLoss};
use crate::nn::FeedForwardModel;
use crate::tensor::Tensor;

/// Relative tolerance below which the Arnoldi subdiagonal is treated as a
/// happy breakdown (the subspace already contains the exact solution).
const BREAKDOWN_RTOL: f64 = 1e-12;

/// Diagonal entries smaller than this make the triangular solve singular.
const SINGULAR_DIAG_TOL: f64 = 1e-14;

/// Anything that can act as a square linear map on tensors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &Tensor) -> Result<Tensor>;
}

/// Explicit row-major square matrix; the test-side instantiation of
/// [`LinearOperator`].
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::InvalidShape(format!(
                "dense {n}x{n} matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(DenseMatrix { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        DenseMatrix { n, entries }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d;
        }
        DenseMatrix { n, entries }
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &Tensor) -> Result<Tensor> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let x = v.as_slice();
        let mut out = Vec::with_capacity(self.n);
        for row in 0..self.n {
            let r = &self.entries[row * self.n..(row + 1) * self.n];
            out.push(r.iter().zip(x).map(|(a, b)| a * b).sum());
        }
        Tensor::from_vec(out)
    }
}

/// Incremental Arnoldi/Givens state for one GMRES solve.
///
/// `raw_column(j)` holds the untouched Hessenberg entries h_{1..j+2, j}
/// produced by modified Gram-Schmidt; `r_column(j)` the same column after
/// all plane rotations, i.e. column j of the upper-triangular factor.
#[derive(Debug, Clone)]
pub struct ArnoldiState {
    basis: Vec<Tensor>,
    raw_columns: Vec<Vec<f64>>,
    r_columns: Vec<Vec<f64>>,
    givens: Vec<(f64, f64)>,
    rhs: Vec<f64>,
    beta: f64,
    residual_norm: f64,
    breakdown: bool,
    pending: Option<Vec<f64>>,
}

impl ArnoldiState {
    /// Start from the initial residual r₀; β = ‖r₀‖₂ must be positive.
    pub fn new(r0: &Tensor) -> Result<Self> {
        let beta = r0.l2_norm();
        if beta <= 0.0 {
            return Err(Error::InvalidConfig(
                "Arnoldi start vector has zero norm".into(),
            ));
        }
        Ok(ArnoldiState {
            basis: vec![r0.scale(1.0 / beta)],
            raw_columns: Vec::new(),
            r_columns: Vec::new(),
            givens: Vec::new(),
            rhs: vec![beta],
            beta,
            residual_norm: beta,
            breakdown: false,
            pending: None,
        })
    }

    /// Number of completed columns (= Krylov dimension m so far).
    pub fn dimension(&self) -> usize {
        self.r_columns.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Orthonormal basis v₁..v_{j+1} built so far.
    pub fn basis(&self) -> &[Tensor] {
        &self.basis
    }

    /// Hessenberg column `j` (0-based) before rotations: entries h_{1..j+2, j}.
    pub fn raw_column(&self, j: usize) -> &[f64] {
        &self.raw_columns[j]
    }

    /// Column `j` of the upper-triangular factor: entries rows 1..j+1.
    pub fn r_column(&self, j: usize) -> &[f64] {
        &self.r_columns[j]
    }

    /// Rotated right-hand side (starts as β e₁).
    pub fn rotated_rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// |last entry of the rotated rhs| = current least-squares residual norm.
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Residual relative to β, the quantity the stop rule compares to τ.
    pub fn relative_residual(&self) -> f64 {
        self.residual_norm / self.beta
    }

    /// Whether the last step hit a happy breakdown (h_{j+1,j} ≈ 0).
    pub fn happy_breakdown(&self) -> bool {
        self.breakdown
    }

    /// One Arnoldi expansion: w ← op·v_j, modified Gram-Schmidt against the
    /// basis, then either normalize v_{j+1} or flag a happy breakdown. The
    /// new Hessenberg column is left pending for [`ArnoldiState::givens_update`].
    pub fn arnoldi_step<L: LinearOperator + ?Sized>(&mut self, op: &L) -> Result<()> {
        assert!(
            self.pending.is_none(),
            "givens_update must run before the next arnoldi_step"
        );
        assert!(!self.breakdown, "cannot expand past a happy breakdown");

        let j = self.basis.len(); // column index, 1-based size after push
        let mut w = op.apply(&self.basis[j - 1])?;
        let mut column = Vec::with_capacity(j + 1);
        for v in &self.basis {
            let h = w.dot(v)?;
            column.push(h);
            w = w.axpy(-h, v)?;
        }
        let h_sub = w.l2_norm();
        column.push(h_sub);
        if h_sub < BREAKDOWN_RTOL * self.beta {
            self.breakdown = true;
        } else {
            self.basis.push(w.scale(1.0 / h_sub));
        }
        self.pending = Some(column);
        Ok(())
    }

    /// Apply the accumulated rotations to the pending column, compute one new
    /// rotation annihilating its subdiagonal entry, rotate the rhs, and update
    /// the tracked residual norm.
    pub fn givens_update(&mut self) {
        let raw = self
            .pending
            .take()
            .expect("no pending Hessenberg column; run arnoldi_step first");
        let mut column = raw.clone();
        self.raw_columns.push(raw);

        for (i, &(c, s)) in self.givens.iter().enumerate() {
            let a = column[i];
            let b = column[i + 1];
            column[i] = c * a + s * b;
            column[i + 1] = -s * a + c * b;
        }
        let j = column.len() - 2;
        let (c, s) = givens_rotation(column[j], column[j + 1]);
        column[j] = c * column[j] + s * column[j + 1];
        column.pop(); // subdiagonal entry is now zero by construction

        self.rhs.push(0.0);
        let a = self.rhs[j];
        self.rhs[j] = c * a;
        self.rhs[j + 1] = -s * a;

        self.givens.push((c, s));
        self.residual_norm = self.rhs[j + 1].abs();
        self.r_columns.push(column);
    }

    /// Solve R γ = rotated-rhs(1..m) by back-substitution.
    pub fn solve_coefficients(&self) -> Result<Vec<f64>> {
        solve_upper_triangular(&self.r_columns, &self.rhs[..self.r_columns.len()])
    }

    /// δ̃ = δ⁽⁰⁾ + V_m γ for the current least-squares coefficients.
    pub fn assemble_solution(&self, delta0: &Tensor) -> Result<Tensor> {
        let gamma = self.solve_coefficients()?;
        let mut out = delta0.clone();
        for (g, v) in gamma.iter().zip(&self.basis) {
            out = out.axpy(*g, v)?;
        }
        Ok(out)
    }
}

/// Plane rotation (c, s) with c·a + s·b = hypot(a, b) and −s·a + c·b = 0.
fn givens_rotation(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Back-substitution on a column-stored upper-triangular system.
/// `columns[j]` holds R_{1..j+1, j}; a diagonal entry at or below the
/// singularity tolerance is an error naming the offending index.
pub fn solve_upper_triangular(columns: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = columns.len();
    assert_eq!(rhs.len(), m, "rhs length must match the system size");
    let mut work = rhs.to_vec();
    let mut gamma = vec![0.0; m];
    for j in (0..m).rev() {
        let diag = columns[j][j];
        if diag.abs() <= SINGULAR_DIAG_TOL {
            return Err(Error::SingularDiagonal {
                index: j,
                value: diag,
            });
        }
        let g = work[j] / diag;
        gamma[j] = g;
        for i in 0..j {
            work[i] -= g * columns[j][i];
        }
    }
    Ok(gamma)
}

/// Outcome of one GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresResult {
    /// δ̃ = δ⁽⁰⁾ + V_m γ*, the least-squares solution in the affine Krylov space.
    pub solution: Tensor,
    /// Krylov dimension m actually built (0 only when δ⁽⁰⁾ was already exact).
    pub iterations: usize,
    /// ‖r̃‖₂ / β at exit.
    pub final_relative_residual: f64,
    /// Whether the stop rule `‖r̃‖₂ / β < τ` was met.
    pub converged: bool,
}

/// Matrix-free GMRES for `op · δ = g`, started at `delta0`.
///
/// Runs a single Arnoldi sweep (no restarts) of at most `m_max` steps,
/// stopping early when the relative residual drops below `tau` or the
/// subspace becomes exact. Non-convergence at `m_max` is not an error: the
/// best least-squares solution is returned with `converged = false`.
/// `tau = 0` disables the early stop entirely.
pub fn gmres<L: LinearOperator + ?Sized>(
    op: &L,
    g: &Tensor,
    delta0: &Tensor,
    tau: f64,
    m_max: usize,
) -> Result<GmresResult> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tau must be finite and >= 0, got {tau}"
        )));
    }
    if m_max == 0 {
        return Err(Error::InvalidConfig("m_max must be >= 1".into()));
    }
    let n = op.dim();
    if g.len() != n || delta0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if g.len() != n { g.len() } else { delta0.len() },
        });
    }

    let r0 = if delta0.as_slice().iter().all(|&v| v == 0.0) {
        g.clone()
    } else {
        g.sub(&op.apply(delta0)?)?
    };
    let beta = r0.l2_norm();
    if beta <= 1e-14 * (1.0 + g.l2_norm()) {
        // delta0 already solves the system to machine precision.
        return Ok(GmresResult {
            solution: delta0.clone(),
            iterations: 0,
            final_relative_residual: 0.0,
            converged: true,
        });
    }

    let mut state = ArnoldiState::new(&r0)?;
    let steps = m_max.min(n);
    for _ in 0..steps {
        state.arnoldi_step(op)?;
        state.givens_update();
        if state.happy_breakdown() || state.relative_residual() < tau {
            break;
        }
    }

    let solution = state.assemble_solution(delta0)?;
    let final_relative_residual = state.relative_residual();
    Ok(GmresResult {
        solution,
        iterations: state.dimension(),
        final_relative_residual,
        converged: final_relative_residual < tau,
    })
}

/// Approximate Newton ascent direction H⁻¹g at (x, y): take g = ∇L(x),
/// start the solve at δ⁽⁰⁾ = g, and run GMRES against the finite-difference
/// Hessian-vector operator.
pub fn approximate_newton_direction(
    model: &FeedForwardModel,
    x: &Tensor,
    y: usize,
    eta: f64,
    tau: f64,
    m_max: usize,
) -> Result<(Tensor, GmresResult)> {
    let objective = InputLoss::new(model, y);
    let g = model.input_gradient(x, y)?;
    let op = HvpOperator::with_base_gradient(objective, x.clone(), eta, g.clone())?;
    let result = gmres(&op, &g, &g, tau, m_max)?;
    Ok((result.solution.clone(), result))
}
