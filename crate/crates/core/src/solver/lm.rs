use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};

use super::problem::{whitened_sq_norm, BlockValue, Problem, ResidualBlock};
use super::SolverError;

const MIN_DIAGONAL: f64 = 1e-6;
const MAX_DIAGONAL: f64 = 1e32;
const MAX_DAMPING: f64 = 1e16;
const DAMPING_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Initial Marquardt damping, relative to the Hessian diagonal.
    pub initial_damping: f64,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iters: 100, rel_tol: 1e-8, grad_tol: 1e-10, initial_damping: 1e-4, execution: Execution::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub termination: Termination,
    /// Cost after every iteration, accepted or not.
    pub cost_trace: Vec<f64>,
}

/// Maps free parameter blocks to column offsets in the normal equations.
struct Layout {
    offsets: Vec<Option<usize>>,
    dim: usize,
}

impl Layout {
    fn new(problem: &Problem) -> Self {
        let mut dim = 0;
        let offsets = problem
            .blocks
            .iter()
            .map(|b| {
                if b.constant {
                    None
                } else {
                    let o = dim;
                    dim += b.value.tangent_dim();
                    Some(o)
                }
            })
            .collect();
        Layout { offsets, dim }
    }
}

struct Linearization {
    cost: f64,
    hessian: DMatrix<f64>,
    gradient: DVector<f64>,
}

/// Whitened, loss-corrected residual and Jacobians of one block.
struct Corrected {
    rho: f64,
    residual: DVector<f64>,
    jacobians: Vec<DMatrix<f64>>,
}

fn correct(rb: &ResidualBlock, values: &[BlockValue]) -> Result<Corrected, SolverError> {
    let params: Vec<&BlockValue> = rb.blocks.iter().map(|b| &values[b.0]).collect();
    let eval = rb.cost.evaluate(&params, true).map_err(|e| SolverError::NumericalFailure(e.to_string()))?;
    let dim = rb.cost.dim();
    if eval.residual.len() != dim || eval.jacobians.len() != params.len() {
        return Err(SolverError::Structural("residual returned wrong number of rows or Jacobians".into()));
    }
    for (j, p) in eval.jacobians.iter().zip(&params) {
        if j.nrows() != dim || j.ncols() != p.tangent_dim() {
            return Err(SolverError::Structural(format!(
                "Jacobian is {}x{}, expected {}x{}",
                j.nrows(),
                j.ncols(),
                dim,
                p.tangent_dim()
            )));
        }
    }
    let (mut r, mut jac) = (eval.residual, eval.jacobians);
    if let Some(w) = &rb.sqrt_info {
        r = w * r;
        jac = jac.iter().map(|j| w * j).collect();
    }
    if !r.iter().all(|v| v.is_finite()) || !jac.iter().all(|j| j.iter().all(|v| v.is_finite())) {
        return Err(SolverError::NumericalFailure("non-finite residual or Jacobian".into()));
    }
    let s = r.norm_squared();
    let [rho, d1, d2] = rb.loss.evaluate(s);
    // Triggs correction; reduces to plain IRLS scaling when ρ″ ≤ 0.
    let sqrt_d1 = d1.sqrt();
    if s == 0.0 || d2 <= 0.0 {
        r *= sqrt_d1;
        for j in &mut jac {
            *j *= sqrt_d1;
        }
    } else {
        let alpha = 1.0 - (1.0 + 2.0 * s * d2 / d1).max(0.0).sqrt();
        let rr = &r * r.transpose() * (alpha / s);
        for j in &mut jac {
            *j = (&*j - &rr * &*j) * sqrt_d1;
        }
        r *= sqrt_d1 / (1.0 - alpha);
    }
    Ok(Corrected { rho, residual: r, jacobians: jac })
}

fn linearize(problem: &Problem, layout: &Layout, exec: Execution) -> Result<Linearization, SolverError> {
    let values: Vec<BlockValue> = problem.blocks.iter().map(|b| b.value).collect();
    let pieces = par::map(&problem.residuals, exec, |rb| correct(rb, &values));

    let n = layout.dim;
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    let mut gradient = DVector::<f64>::zeros(n);
    let mut cost = 0.0;
    for (rb, piece) in problem.residuals.iter().zip(pieces) {
        let piece = piece?;
        cost += piece.rho;
        for (a, ja) in rb.blocks.iter().zip(&piece.jacobians) {
            let Some(oa) = layout.offsets[a.0] else { continue };
            let jta = ja.transpose();
            let mut gseg = gradient.rows_mut(oa, ja.ncols());
            gseg += &jta * &piece.residual;
            for (b, jb) in rb.blocks.iter().zip(&piece.jacobians) {
                let Some(ob) = layout.offsets[b.0] else { continue };
                let mut h = hessian.view_mut((oa, ob), (ja.ncols(), jb.ncols()));
                h += &jta * jb;
            }
        }
    }
    Ok(Linearization { cost, hessian, gradient })
}

fn cost_at(problem: &Problem, values: &[BlockValue], exec: Execution) -> Option<f64> {
    let parts = par::map(&problem.residuals, exec, |rb| {
        let params: Vec<&BlockValue> = rb.blocks.iter().map(|b| &values[b.0]).collect();
        let eval = rb.cost.evaluate(&params, false).ok()?;
        let s = whitened_sq_norm(&eval.residual, rb.sqrt_info.as_ref());
        s.is_finite().then(|| rb.loss.evaluate(s)[0])
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Some(total)
}

fn damped_step(lin: &Linearization, lambda: f64) -> Option<DVector<f64>> {
    let mut a = lin.hessian.clone();
    if lambda > 0.0 {
        for i in 0..a.nrows() {
            let d = a[(i, i)].clamp(MIN_DIAGONAL, MAX_DIAGONAL);
            a[(i, i)] += lambda * d;
        }
    }
    let chol = a.cholesky()?;
    let step = chol.solve(&(-&lin.gradient));
    step.iter().all(|v| v.is_finite()).then_some(step)
}

fn retract_all(problem: &Problem, layout: &Layout, step: &DVector<f64>) -> Vec<BlockValue> {
    problem
        .blocks
        .iter()
        .zip(&layout.offsets)
        .map(|(b, off)| match off {
            Some(o) => b.value.retract(&step.as_slice()[*o..*o + b.value.tangent_dim()]),
            None => b.value,
        })
        .collect()
}

/// Minimises `Σ ρ(‖W·r‖²)` over the free blocks of `problem` with
/// Levenberg–Marquardt, writing the solution back into the problem.
pub fn solve(problem: &mut Problem, options: &SolverOptions) -> Result<SolveReport, SolverError> {
    problem.validate()?;
    let layout = Layout::new(problem);
    let exec = options.execution;
    let mut lin = linearize(problem, &layout, exec)?;
    if !lin.cost.is_finite() {
        return Err(SolverError::NumericalFailure("non-finite initial cost".into()));
    }
    let initial_cost = lin.cost;
    let mut lambda = options.initial_damping.max(0.0);
    let mut trace = Vec::new();
    let mut iterations = 0;

    let termination = loop {
        if lin.cost == 0.0 || lin.gradient.amax() <= options.grad_tol {
            break Termination::Converged;
        }
        if iterations >= options.max_iters {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let trial = damped_step(&lin, lambda).and_then(|step| {
            let values = retract_all(problem, &layout, &step);
            let cost = cost_at(problem, &values, exec)?;
            Some((step, values, cost))
        });
        match trial {
            Some((step, values, cost)) if cost < lin.cost => {
                let decrease = (lin.cost - cost) / lin.cost;
                for (b, v) in problem.blocks.iter_mut().zip(values) {
                    b.value = v;
                }
                lambda = if lambda > 0.0 { (lambda / 10.0).max(DAMPING_FLOOR) } else { 0.0 };
                let previous = lin.cost;
                lin = linearize(problem, &layout, exec)?;
                debug_assert!(lin.cost <= previous);
                trace.push(lin.cost);
                if decrease < options.rel_tol || step.amax() < 1e-15 {
                    break Termination::Converged;
                }
            }
            Some((_, _, cost)) if cost - lin.cost <= options.rel_tol * lin.cost => {
                // No step can improve on the current point at working precision.
                trace.push(lin.cost);
                break Termination::Converged;
            }
            _ => {
                lambda = if lambda > 0.0 { lambda * 10.0 } else { DAMPING_FLOOR };
                trace.push(lin.cost);
                if lambda > MAX_DAMPING {
                    break Termination::Stalled;
                }
            }
        }
    };

    Ok(SolveReport { iterations, initial_cost, final_cost: lin.cost, termination, cost_trace: trace })
}
