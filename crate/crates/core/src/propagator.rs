//! Time-ordered evolution operators from piecewise-constant exponentials on a
//! midpoint grid.
//!
//! The symmetric grid `t_j = j T / n`, `j = -n+1/2, …, n-1/2` pairs every
//! step `t_j` with `-t_j` exactly, so for Hamiltonians obeying
//! `Θ H(t) Θ⁻¹ = H(-t)` the discrete product itself satisfies
//! `Θ U Θ⁻¹ = U†` up to rounding.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependent;
use crate::linalg::{hermitian_defect, identity, max_abs, max_abs_diff, unitary_exp, ComplexMatrix};
use crate::spin::TimeReversalOp;

/// Per-step Hermiticity tolerance; larger defects abort the propagation.
pub const STEP_HERMITIAN_TOL: f64 = 1e-10;

/// Target bound on `dt · max‖H‖` used to pick a default step count.
pub const DEFAULT_PHASE_PER_STEP: f64 = 0.05;

/// Uniform midpoint grid over `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    start: f64,
    end: f64,
    dt: f64,
    midpoints: Vec<f64>,
}

impl TimeGrid {
    /// `2n` midpoints over `(-T, T)`. Negative-time points are built by
    /// negating the positive ones so that `t_{-j} = -t_j` holds bitwise.
    pub fn symmetric(half_interval: f64, steps_per_half: usize) -> Result<Self> {
        if !(half_interval > 0.0 && half_interval.is_finite()) {
            return Err(Error::InvalidGrid(format!("half-interval must be positive, got {half_interval}")));
        }
        if steps_per_half == 0 {
            return Err(Error::InvalidGrid("need at least one step per half-interval".into()));
        }
        let dt = half_interval / steps_per_half as f64;
        let positive: Vec<f64> =
            (0..steps_per_half).map(|k| (k as f64 + 0.5) * half_interval / steps_per_half as f64).collect();
        let mut midpoints: Vec<f64> = positive.iter().rev().map(|t| -t).collect();
        midpoints.extend(positive);
        Ok(TimeGrid { start: -half_interval, end: half_interval, dt, midpoints })
    }

    /// `steps` midpoints over an arbitrary interval `[start, end]`.
    pub fn span(start: f64, end: f64, steps: usize) -> Result<Self> {
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidGrid(format!("empty interval [{start}, {end}]")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        let dt = (end - start) / steps as f64;
        let midpoints = (0..steps).map(|k| start + (k as f64 + 0.5) * dt).collect();
        Ok(TimeGrid { start, end, dt, midpoints })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    pub fn len(&self) -> usize {
        self.midpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.midpoints.is_empty()
    }

    /// Time reached after `k` steps.
    pub fn time_after(&self, k: usize) -> f64 {
        if k == self.midpoints.len() {
            self.end
        } else {
            self.start + k as f64 * self.dt
        }
    }
}

/// Smallest per-half step count with `dt · max‖H‖ ≤ 0.05`, where the norm is
/// the largest entry of `H(t)` sampled across `[-T, T]`.
pub fn default_steps(h: &dyn TimeDependent, half_interval: f64) -> usize {
    const SAMPLES: usize = 64;
    let largest = (0..=SAMPLES)
        .map(|k| -half_interval + 2.0 * half_interval * k as f64 / SAMPLES as f64)
        .map(|t| max_abs(&h.at(t)))
        .fold(0.0_f64, f64::max);
    ((half_interval * largest / DEFAULT_PHASE_PER_STEP).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub grid: TimeGrid,
    pub u_final: ComplexMatrix,
    /// `(t, U(t, start))`, starting with `(start, I)` and ending at `end`.
    pub checkpoints: Vec<(f64, ComplexMatrix)>,
    pub unitarity_defect: f64,
}

/// `U = Π exp(-i H(t_j) dt)` with the earliest factor applied first. With
/// `checkpoint_stride = Some(k)` the partial product is stored every `k`
/// steps (plus the initial and final times).
pub fn propagate(h: &dyn TimeDependent, grid: &TimeGrid, checkpoint_stride: Option<usize>) -> Result<Propagation> {
    let dim = h.dim();
    let dt = grid.dt();
    let mut u = identity(dim);
    let stride = checkpoint_stride.filter(|&s| s > 0);
    let mut checkpoints = Vec::new();
    if stride.is_some() {
        checkpoints.push((grid.start(), u.clone()));
    }
    let total = grid.len();
    for (k, &t) in grid.midpoints().iter().enumerate() {
        let hm = h.at(t);
        let defect = hermitian_defect(&hm);
        if defect > STEP_HERMITIAN_TOL {
            return Err(Error::NonHermitianAt { time: t, defect });
        }
        u = unitary_exp(&hm, dt) * u;
        if let Some(s) = stride {
            let done = k + 1;
            if done % s == 0 || done == total {
                checkpoints.push((grid.time_after(done), u.clone()));
            }
        }
    }
    let unitarity_defect = crate::linalg::unitarity_defect(&u);
    Ok(Propagation { grid: grid.clone(), u_final: u, checkpoints, unitarity_defect })
}

/// `max |Θ U Θ⁻¹ - U†|`.
pub fn theta_conjugation_identity(p: &Propagation, theta: &TimeReversalOp) -> Result<f64> {
    let lhs = theta.conjugate(&p.u_final)?;
    Ok(max_abs_diff(&lhs, &p.u_final.adjoint()))
}

/// `|U_{mn}|²` for all basis pairs.
pub fn probabilities(u: &ComplexMatrix) -> ComplexMatrix {
    u.map(|z| crate::linalg::c(z.norm_sqr(), 0.0))
}

fn max_probability_change(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x.norm_sqr() - y.norm_sqr()).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    pub half_interval: f64,
    pub steps_per_half: usize,
    /// Largest change of any `|U_{mn}|²` between the last two refinements.
    pub last_change: f64,
    /// `last_change / dt` at the coarser of the two grids.
    pub rate_constant: f64,
    pub doublings: usize,
    pub converged: bool,
}

/// Doubles the step count at fixed `T` until no transition probability moves
/// by more than `tol`. Returns the finer propagation of the final pair.
pub fn converge_steps(
    h: &dyn TimeDependent,
    half_interval: f64,
    initial_steps: usize,
    tol: f64,
    max_doublings: usize,
) -> Result<(Propagation, Convergence)> {
    let mut steps = initial_steps.max(1);
    let mut coarse = propagate(h, &TimeGrid::symmetric(half_interval, steps)?, None)?;
    let mut doublings = 0;
    loop {
        let finer_steps = steps * 2;
        let fine = propagate(h, &TimeGrid::symmetric(half_interval, finer_steps)?, None)?;
        doublings += 1;
        let change = max_probability_change(&coarse.u_final, &fine.u_final);
        let converged = change < tol;
        if converged || doublings >= max_doublings {
            let info = Convergence {
                half_interval,
                steps_per_half: finer_steps,
                last_change: change,
                rate_constant: change / coarse.grid.dt(),
                doublings,
                converged,
            };
            return Ok((fine, info));
        }
        coarse = fine;
        steps = finer_steps;
    }
}

/// Doubles `T` at fixed `dt` until no transition probability moves by more
/// than `tol`.
pub fn converge_interval(
    h: &dyn TimeDependent,
    initial_half_interval: f64,
    dt: f64,
    tol: f64,
    max_doublings: usize,
) -> Result<(Propagation, Convergence)> {
    let steps_for = |t: f64| ((t / dt).round() as usize).max(1);
    let mut half = initial_half_interval;
    let mut coarse = propagate(h, &TimeGrid::symmetric(half, steps_for(half))?, None)?;
    let mut doublings = 0;
    loop {
        let longer = half * 2.0;
        let fine = propagate(h, &TimeGrid::symmetric(longer, steps_for(longer))?, None)?;
        doublings += 1;
        let change = max_probability_change(&coarse.u_final, &fine.u_final);
        let converged = change < tol;
        if converged || doublings >= max_doublings {
            let info = Convergence {
                half_interval: longer,
                steps_per_half: steps_for(longer),
                last_change: change,
                rate_constant: change / dt,
                doublings,
                converged,
            };
            return Ok((fine, info));
        }
        coarse = fine;
        half = longer;
    }
}
