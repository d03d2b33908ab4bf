//! Minimization of `f(X) = ||A X B - C||_F^2` over matrices with orthonormal
//! columns, by a Cayley-transform curvilinear search.
//!
//! Each iteration moves along `X(t) = (I + t/2 W)^-1 (I - t/2 W) X` with the
//! skew matrix `W = G X^T - X G^T`, which keeps `X^T X = I` exactly (up to
//! rounding) without re-orthonormalizing. Steps are chosen by Armijo
//! backtracking.

use nalgebra::LU;

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_error, polar_factor};
use crate::tensor::Matrix;

/// Feasibility required of a starting point.
pub const START_FEASIBILITY_TOL: f64 = 1e-8;

/// `min ||A X B - C||_F^2` with `A: p x m`, `X: m x q`, `B: q x s`, `C: p x s`.
///
/// The Gram products `A^T A`, `B B^T` and `A^T C B^T` are formed once so that
/// evaluating `f` and its gradient costs `O(m^2 q + m q^2)` per call.
#[derive(Clone, Debug)]
pub struct StiefelProblem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    ata: Matrix,
    bbt: Matrix,
    m: Matrix,
    c_norm_sq: f64,
}

impl StiefelProblem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let (p, m) = a.shape();
        let (q, s) = b.shape();
        if c.shape() != (p, s) {
            return Err(Error::DimensionMismatch(format!(
                "A is {p}x{m} and B is {q}x{s}, so C must be {p}x{s}, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if q > m {
            return Err(Error::DimensionMismatch(format!(
                "X would be {m}x{q}; orthonormal columns need m >= q"
            )));
        }
        if m == 0 || q == 0 {
            return Err(Error::DimensionMismatch("empty variable".into()));
        }
        let ata = a.tr_mul(&a);
        let bbt = &b * b.transpose();
        let m_mat = a.tr_mul(&c) * b.transpose();
        let c_norm_sq = c.norm_squared();
        Ok(Self {
            a,
            b,
            c,
            ata,
            bbt,
            m: m_mat,
            c_norm_sq,
        })
    }

    /// Shape `(m, q)` of the variable.
    pub fn var_shape(&self) -> (usize, usize) {
        (self.a.ncols(), self.b.nrows())
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.shape() != self.var_shape() {
            let (m, q) = self.var_shape();
            return Err(Error::DimensionMismatch(format!(
                "X must be {m}x{q}, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// `||A X B - C||_F^2`, evaluated directly.
    pub fn objective(&self, x: &Matrix) -> Result<f64> {
        self.check(x)?;
        Ok((&self.a * x * &self.b - &self.c).norm_squared())
    }

    /// Same value through the Gram products. Cheaper, but loses absolute
    /// accuracy around `eps * ||C||^2`.
    fn objective_fast(&self, x: &Matrix) -> f64 {
        let ax_b = &self.ata * x * &self.bbt;
        x.dot(&ax_b) - 2.0 * x.dot(&self.m) + self.c_norm_sq
    }

    /// Euclidean gradient `2 A^T (A X B - C) B^T`.
    pub fn gradient(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        Ok(self.gradient_unchecked(x))
    }

    fn gradient_unchecked(&self, x: &Matrix) -> Matrix {
        (&self.ata * x * &self.bbt - &self.m) * 2.0
    }

    /// Riemannian gradient `G - X G^T X` at a feasible `X`.
    pub fn riemannian_gradient(&self, x: &Matrix) -> Result<Matrix> {
        let g = self.gradient(x)?;
        Ok(&g - x * g.tr_mul(x))
    }

    fn a_is_isometry(&self) -> bool {
        let m = self.ata.nrows();
        (&self.ata - Matrix::identity(m, m)).amax() <= 1e-10
    }
}

/// Free-function form of [`StiefelProblem::gradient`].
pub fn gradient(prob: &StiefelProblem, x: &Matrix) -> Result<Matrix> {
    prob.gradient(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Initial trial step of every backtracking search.
    pub step: f64,
    pub armijo: f64,
    pub backtrack: f64,
    /// Stop once the Riemannian gradient norm drops to this.
    pub grad_tol: f64,
    /// Stop once an accepted step lowers `f` by less than this fraction.
    pub rel_obj_tol: f64,
    /// Start each search from a Barzilai-Borwein step instead of `step`.
    pub bb_step: bool,
    /// When `A^T A = I` the objective is linear on the feasible set and the
    /// polar factor of `A^T C B^T` is a global minimizer; use it as a start.
    pub closed_form_seed: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step: 0.1,
            armijo: 1e-4,
            backtrack: 0.5,
            grad_tol: 1e-8,
            rel_obj_tol: 1e-10,
            bb_step: false,
            closed_form_seed: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.step, self.armijo, self.grad_tol, self.rel_obj_tol];
        if self.max_iters == 0 || positive.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "solver settings must be positive: {self:?}"
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientNorm,
    ObjectiveChange,
    /// Backtracking could not find an acceptable step (rounding floor reached).
    StepStalled,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x: Matrix,
    pub objective: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Objective after every accepted step, starting with `f(X0)`.
    pub history: Vec<f64>,
    /// Worst `max |X^T X - I|` over the accepted iterates.
    pub max_feasibility_error: f64,
    pub final_gradient_norm: f64,
}

/// `X(t)` along the Cayley curve. Uses the low-rank (Woodbury) form
/// `X - t U (I + t/2 V^T U)^-1 V^T X` with `U = [G, X]`, `V = [X, -G]`
/// when `2q < m`, a dense `m x m` solve otherwise.
fn cayley_step(x: &Matrix, g: &Matrix, t: f64) -> Result<Matrix> {
    let (m, q) = x.shape();
    let singular = || Error::Numeric("singular Cayley system (W must be skew)".into());
    if 2 * q < m {
        let mut u = Matrix::zeros(m, 2 * q);
        u.columns_mut(0, q).copy_from(g);
        u.columns_mut(q, q).copy_from(x);
        let mut v = Matrix::zeros(m, 2 * q);
        v.columns_mut(0, q).copy_from(x);
        v.columns_mut(q, q).copy_from(&(-g));
        let vtu = v.tr_mul(&u);
        let inner = Matrix::identity(2 * q, 2 * q) + vtu * (0.5 * t);
        let rhs = v.tr_mul(x);
        let sol = LU::new(inner).solve(&rhs).ok_or_else(singular)?;
        Ok(x - u * sol * t)
    } else {
        let w = g * x.transpose() - x * g.transpose();
        let eye = Matrix::identity(m, m);
        let lhs = &eye + &w * (0.5 * t);
        let rhs = (&eye - &w * (0.5 * t)) * x;
        LU::new(lhs).solve(&rhs).ok_or_else(singular)
    }
}

struct Run {
    x: Matrix,
    iterations: usize,
    stop: StopReason,
    history: Vec<f64>,
    max_feas: f64,
    grad_norm: f64,
}

fn descend(prob: &StiefelProblem, x0: Matrix, cfg: &SolverConfig) -> Result<Run> {
    let mut x = x0;
    let mut f = prob.objective_fast(&x);
    let mut history = vec![f];
    let mut max_feas = orthonormality_error(&x);
    let mut g = prob.gradient_unchecked(&x);
    let mut rg = &g - &x * g.tr_mul(&x);
    let mut prev: Option<(Matrix, Matrix)> = None;
    let mut iterations = 0;
    let stop = loop {
        if rg.norm() <= cfg.grad_tol {
            break StopReason::GradientNorm;
        }
        if iterations == cfg.max_iters {
            break StopReason::MaxIters;
        }
        // ||W||_F^2 = 2||G||^2 - 2 tr((X^T G)^2) for feasible X; f'(0) = -||W||^2 / 2
        let xtg = x.tr_mul(&g);
        let w_norm_sq = (2.0 * g.norm_squared() - 2.0 * xtg.dot(&xtg.transpose())).max(0.0);
        let slope = -0.5 * w_norm_sq;

        let mut t = cfg.step;
        if cfg.bb_step {
            if let Some((px, prg)) = &prev {
                let s = &x - px;
                let y = &rg - prg;
                let sy = s.dot(&y).abs();
                if sy > 0.0 {
                    t = (s.norm_squared() / sy).clamp(1e-10, 1e10);
                }
            }
        }
        let mut accepted = None;
        while t > 1e-20 {
            let y = cayley_step(&x, &g, t)?;
            let fy = prob.objective_fast(&y);
            if fy <= f + cfg.armijo * t * slope {
                accepted = Some((y, fy));
                break;
            }
            t *= cfg.backtrack;
        }
        let Some((y, fy)) = accepted else {
            break StopReason::StepStalled;
        };
        iterations += 1;
        let decrease = f - fy;
        max_feas = max_feas.max(orthonormality_error(&y));
        if cfg.bb_step {
            prev = Some((x.clone(), rg.clone()));
        }
        x = y;
        f = fy;
        history.push(f);
        g = prob.gradient_unchecked(&x);
        rg = &g - &x * g.tr_mul(&x);
        if decrease <= cfg.rel_obj_tol * f.abs().max(f64::MIN_POSITIVE) {
            break StopReason::ObjectiveChange;
        }
    };
    Ok(Run {
        x,
        iterations,
        stop,
        history,
        max_feas,
        grad_norm: rg.norm(),
    })
}

/// Runs the curvilinear search from a feasible `x0`.
///
/// For square `X` the feasible set has two components (`det = +-1`) that the
/// Cayley curve cannot leave, so the search also starts from `x0` with its
/// first column negated and keeps the better result. The returned objective
/// is never above `f(x0)`.
pub fn solve(prob: &StiefelProblem, x0: &Matrix, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    prob.check(x0)?;
    let feas = orthonormality_error(x0);
    if !feas.is_finite() || feas > START_FEASIBILITY_TOL {
        return Err(Error::NotOrthonormal(feas));
    }

    if cfg.closed_form_seed && prob.a_is_isometry() {
        // f = const - 2 tr(X^T M) on the feasible set: the polar factor is optimal
        let seed = polar_factor(&prob.m)?;
        let f0 = prob.objective(x0)?;
        let f = prob.objective(&seed)?;
        if f <= f0 {
            let rg = prob.riemannian_gradient(&seed)?;
            return Ok(SolveReport {
                objective: f,
                iterations: 0,
                stop: StopReason::GradientNorm,
                history: vec![f0, f],
                max_feasibility_error: orthonormality_error(x0).max(orthonormality_error(&seed)),
                final_gradient_norm: rg.norm(),
                x: seed,
            });
        }
    }

    let mut starts = vec![x0.clone()];
    let (m, q) = prob.var_shape();
    if m == q {
        let mut reflected = x0.clone();
        reflected.column_mut(0).neg_mut();
        starts.push(reflected);
    }

    // runs are compared on the direct objective; the Gram form is too coarse
    // to separate near-optimal candidates
    let mut best: Option<(f64, Run)> = None;
    for start in starts {
        let run = descend(prob, start, cfg)?;
        let f = prob.objective(&run.x)?;
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, run));
        }
    }
    let (objective, run) = best.expect("at least one start");
    Ok(SolveReport {
        objective,
        iterations: run.iterations,
        stop: run.stop,
        history: run.history,
        max_feasibility_error: run.max_feas,
        final_gradient_norm: run.grad_norm,
        x: run.x,
    })
}
