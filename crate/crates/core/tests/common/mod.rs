//! Shared oracle machinery for the integration tests: dense linear algebra
//! kept deliberately independent of the library's solver path.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soadv::Tensor;

/// Row-major dense matrix for oracle computations.
#[derive(Debug, Clone)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.a[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Random matrix with entries in [-1, 1].
    pub fn random(n: usize, rng: &mut ChaCha8Rng) -> Self {
        Mat {
            n,
            a: (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    /// Well-conditioned nonsymmetric matrix: strong random diagonal plus a
    /// small off-diagonal perturbation.
    pub fn random_well_conditioned(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut m = Self::random(n, rng);
        for v in m.a.iter_mut() {
            *v *= 0.3 / (n as f64).sqrt();
        }
        for i in 0..n {
            let d: f64 = rng.gen_range(1.0..2.0);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            m.a[i * n + i] += sign * d;
        }
        m
    }
}

/// Solve A x = b by LU with partial pivoting (the dense direct oracle).
pub fn lu_solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    let n = a.n;
    let mut lu = a.a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if lu[row * n + col].abs() > lu[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            for j in 0..n {
                lu.swap(col * n + j, pivot * n + j);
            }
            perm.swap(col, pivot);
        }
        let d = lu[col * n + col];
        assert!(d.abs() > 1e-14, "oracle matrix is singular");
        for row in col + 1..n {
            let f = lu[row * n + col] / d;
            lu[row * n + col] = f;
            for j in col + 1..n {
                lu[row * n + j] -= f * lu[col * n + j];
            }
        }
    }
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for row in 1..n {
        for j in 0..row {
            x[row] = x[row] - lu[row * n + j] * x[j];
        }
    }
    for row in (0..n).rev() {
        for j in row + 1..n {
            x[row] = x[row] - lu[row * n + j] * x[j];
        }
        x[row] /= lu[row * n + row];
    }
    x
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns of the returned matrix).
pub fn jacobi_eigen(sym: &Mat) -> (Vec<f64>, Mat) {
    let n = sym.n;
    let mut a = sym.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a.get(i, i)).collect();
    (eigenvalues, v)
}

/// Pseudo-inverse solve of a symmetric system via the Jacobi oracle:
/// components on near-null eigendirections are dropped.
pub fn symmetric_pinv_solve(sym: &Mat, b: &[f64]) -> Vec<f64> {
    let n = sym.n;
    let (vals, vecs) = jacobi_eigen(sym);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = vec![0.0; n];
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda.abs() <= 1e-10 * scale.max(1.0) {
            continue;
        }
        let mut proj = 0.0;
        for i in 0..n {
            proj += vecs.get(i, k) * b[i];
        }
        let coeff = proj / lambda;
        for i in 0..n {
            x[i] += coeff * vecs.get(i, k);
        }
    }
    x
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn tensor(v: &[f64]) -> Tensor {
    Tensor::from_vec(v.to_vec()).unwrap()
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (l2(a) * l2(b))
}

/// Linear-softmax cross-entropy toy: L(x) = -log softmax(W x)_y.
/// Smooth, with closed-form gradient Wᵀ(p − e_y) and Hessian Wᵀ(diag p − p pᵀ)W.
pub struct SoftmaxToy {
    pub dim: usize,
    pub classes: usize,
    pub w: Vec<f64>, // classes x dim, row-major
    pub y: usize,
}

impl SoftmaxToy {
    pub fn random(dim: usize, classes: usize, y: usize, rng: &mut ChaCha8Rng) -> Self {
        SoftmaxToy {
            dim,
            classes,
            w: (0..classes * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            y,
        }
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.classes)
            .map(|k| {
                self.w[k * self.dim..(k + 1) * self.dim]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    pub fn gradient_closed_form(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.probabilities(x);
        p[self.y] -= 1.0;
        let mut g = vec![0.0; self.dim];
        for k in 0..self.classes {
            for j in 0..self.dim {
                g[j] += self.w[k * self.dim + j] * p[k];
            }
        }
        g
    }

    /// Dense analytic Hessian Wᵀ(diag p − p pᵀ)W.
    pub fn hessian(&self, x: &[f64]) -> Mat {
        let p = self.probabilities(x);
        let mut s = Mat::zeros(self.classes);
        for i in 0..self.classes {
            for j in 0..self.classes {
                let v = if i == j { p[i] - p[i] * p[j] } else { -p[i] * p[j] };
                s.set(i, j, v);
            }
        }
        let mut h = Mat::zeros(self.dim);
        for a in 0..self.dim {
            for b in 0..self.dim {
                let mut acc = 0.0;
                for i in 0..self.classes {
                    for j in 0..self.classes {
                        acc += self.w[i * self.dim + a] * s.get(i, j) * self.w[j * self.dim + b];
                    }
                }
                h.set(a, b, acc);
            }
        }
        h
    }

    pub fn hessian_vector(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.hessian(x).matvec(v)
    }
}

impl soadv::hvp::Objective for SoftmaxToy {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&self, x: &Tensor) -> soadv::Result<Tensor> {
        Tensor::from_vec(self.gradient_closed_form(x.as_slice()))
    }
}

/// Quadratic objective ½xᵀAx + bᵀx with analytic gradient, for operator and
/// solver tests that need an exact Hessian.
pub struct QuadraticObjective {
    pub a: Mat,
    pub b: Vec<f64>,
}

impl soadv::hvp::Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.a.n
    }

    fn gradient(&self, x: &Tensor) -> soadv::Result<Tensor> {
        let mut g = self.a.matvec(x.as_slice());
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi += bi;
        }
        Tensor::from_vec(g)
    }
}
