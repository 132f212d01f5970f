//! Backward θ-scheme for the discounted pricing equation
//!
//! ```text
//! −∂ₜV − ½σ²∂ₓₓV − (r − ½σ² − σξ)∂ₓV = (ϱ ∓ ξ·shift) / D
//! ```
//!
//! where `P = D·V`, `D(t) = e^{−∫_t^T r}`, and `(ξ, shift)` is the affine
//! piece of the distance function active at the current gradient. The
//! piece is re-selected each Picard sweep, which makes the iteration a
//! policy iteration on a monotone scheme.

use crate::ambiguity::{ScalarDistance, ScalarPolicy};
use crate::error::{PricerError, Result};

use super::tridiag::Tridiagonal;
use super::{Grid, Side};

/// Number of fully implicit steps before switching to Crank–Nicolson.
pub(crate) const RANNACHER_STEPS: usize = 4;

pub(crate) struct StepCoefficients {
    pub sigma: f64,
    pub rate: f64,
    pub distance: ScalarDistance,
    /// `∫ ϱ(s) / D(s) ds` over the step.
    pub earnings: f64,
}

pub(crate) struct Problem<'a> {
    pub grid: &'a Grid,
    pub side: Side,
    /// One entry per step `[t_k, t_{k+1}]`.
    pub steps: Vec<StepCoefficients>,
    /// `D(t_k)` per time node.
    pub discount: Vec<f64>,
    /// `V(T) = Ψ`.
    pub terminal: Vec<f64>,
    pub picard_tol: f64,
    pub picard_max: usize,
}

pub(crate) enum Obstacle<'a> {
    Free,
    /// Adds `m·(floor − V)⁺`, linearized on the frozen active set.
    Penalty { m: f64, floor: &'a [Vec<f64>] },
    /// Forces `V = floor` wherever `mask` holds.
    Pinned { mask: &'a [Vec<bool>], floor: &'a [Vec<f64>] },
}

pub(crate) struct Solution {
    /// Discounted values `V[k][j]`.
    pub values: Vec<Vec<f64>>,
    /// Unpenalized discrete residual in price units per unit time, per step.
    pub residual: Vec<Vec<f64>>,
    /// The unpenalized system and right-hand side of the first step, for
    /// the complementarity cross-check.
    pub first_step: Option<(Tridiagonal, Vec<f64>)>,
}

impl Problem<'_> {
    fn theta(&self, k: usize) -> f64 {
        let from_end = self.grid.nt() - 1 - k;
        if from_end < RANNACHER_STEPS {
            1.0
        } else {
            0.5
        }
    }

    fn sign(&self) -> f64 {
        match self.side {
            Side::Bid => 1.0,
            Side::Ask => -1.0,
        }
    }

    /// Affine distance piece at each node, from the discounted values `v`.
    fn policies(&self, c: &StepCoefficients, d: f64, v: &[f64], out: &mut [ScalarPolicy]) {
        let n = v.len();
        let dx = self.grid.dx;
        let s = self.sign();
        for j in 0..n {
            let g = if j == 0 {
                (v[1] - v[0]) / dx
            } else if j == n - 1 {
                (v[n - 1] - v[n - 2]) / dx
            } else {
                (v[j + 1] - v[j - 1]) / (2.0 * dx)
            };
            out[j] = c.distance.policy(s * c.sigma * d * g);
        }
    }

    /// Spatial operator `L` and source `f` such that `−∂ₜV = L V + f`.
    fn operator(&self, c: &StepCoefficients, d: f64, pol: &[ScalarPolicy], op: &mut Tridiagonal, src: &mut [f64]) {
        let n = pol.len();
        let dx = self.grid.dx;
        let half_var = 0.5 * c.sigma * c.sigma;
        let diff = half_var / (dx * dx);
        let src_sign = -self.sign();
        for j in 0..n {
            let xi = pol[j].kernel;
            src[j] = src_sign * xi * pol[j].shift / d;
            if xi == 0.0 {
                src[j] = 0.0;
            }
            let mu = c.rate - half_var - c.sigma * xi;
            if j == 0 || j == n - 1 {
                // linear in S at the far field: ∂ₓₓV = ∂ₓV
                let a = (half_var + mu) / dx;
                op.lower[j] = 0.0;
                op.upper[j] = 0.0;
                if j == 0 {
                    op.diag[j] = -a;
                    op.upper[j] = a;
                } else {
                    op.diag[j] = a;
                    op.lower[j] = -a;
                }
                continue;
            }
            let (lo, up) = if mu.abs() * dx <= c.sigma * c.sigma {
                (diff - mu / (2.0 * dx), diff + mu / (2.0 * dx))
            } else if mu > 0.0 {
                (diff, diff + mu / dx)
            } else {
                (diff - mu / dx, diff)
            };
            op.lower[j] = lo;
            op.upper[j] = up;
            op.diag[j] = -(lo + up);
        }
    }

    pub fn solve(&self, obstacle: &Obstacle<'_>, warm: Option<&[Vec<f64>]>) -> Result<Solution> {
        let nt = self.grid.nt();
        let n = self.grid.nx();
        let mut values = vec![Vec::new(); nt + 1];
        values[nt] = self.terminal.clone();
        let want_residual = matches!(obstacle, Obstacle::Penalty { .. });
        let mut residual = if want_residual { vec![Vec::new(); nt] } else { Vec::new() };
        let mut first_step = None;

        let mut pol_old = vec![ScalarPolicy { kernel: 0.0, shift: 0.0 }; n];
        let mut pol = pol_old.clone();
        let mut op_old = Tridiagonal::zeros(n);
        let mut op = Tridiagonal::zeros(n);
        let mut src_old = vec![0.0; n];
        let mut src = vec![0.0; n];
        let mut explicit = vec![0.0; n];
        let mut base_rhs = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut sys = Tridiagonal::zeros(n);
        let mut next = vec![0.0; n];
        let mut scratch = vec![0.0; n];

        for k in (0..nt).rev() {
            let c = &self.steps[k];
            let dt = self.grid.dt(k);
            let theta = self.theta(k);
            let d_new = self.discount[k];
            let d_old = self.discount[k + 1];
            let old = &values[k + 1];

            // explicit half at the old level, with the exact distance there
            self.policies(c, d_old, old, &mut pol_old);
            self.operator(c, d_old, &pol_old, &mut op_old, &mut src_old);
            op_old.apply(old, &mut explicit);
            for j in 0..n {
                base_rhs[j] = old[j]
                    + (1.0 - theta) * dt * (explicit[j] + src_old[j])
                    + c.earnings;
            }

            let mut iterate: Vec<f64> = match warm {
                Some(w) => w[k].clone(),
                None => old.clone(),
            };
            let mut converged = false;
            let mut change = f64::INFINITY;
            for _ in 0..self.picard_max {
                self.policies(c, d_new, &iterate, &mut pol);
                self.operator(c, d_new, &pol, &mut op, &mut src);
                for j in 0..n {
                    sys.lower[j] = -theta * dt * op.lower[j];
                    sys.upper[j] = -theta * dt * op.upper[j];
                    sys.diag[j] = 1.0 - theta * dt * op.diag[j];
                    rhs[j] = base_rhs[j] + theta * dt * src[j];
                }
                match obstacle {
                    Obstacle::Free => {}
                    Obstacle::Penalty { m, floor } => {
                        let f = &floor[k];
                        for j in 0..n {
                            if iterate[j] < f[j] {
                                sys.diag[j] += dt * m;
                                rhs[j] += dt * m * f[j];
                            }
                        }
                    }
                    Obstacle::Pinned { mask, floor } => {
                        for j in 0..n {
                            if mask[k][j] {
                                sys.lower[j] = 0.0;
                                sys.upper[j] = 0.0;
                                sys.diag[j] = 1.0;
                                rhs[j] = floor[k][j];
                            }
                        }
                    }
                }
                sys.solve_into(&rhs, &mut next, &mut scratch);
                change = next
                    .iter()
                    .zip(&iterate)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                    * d_new;
                std::mem::swap(&mut iterate, &mut next);
                if change < self.picard_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(PricerError::PicardNonConvergence { step: k, residual: change });
            }

            if want_residual || k == 0 {
                // unpenalized residual with the policy exact at the solution
                self.policies(c, d_new, &iterate, &mut pol);
                self.operator(c, d_new, &pol, &mut op, &mut src);
                for j in 0..n {
                    sys.lower[j] = -theta * dt * op.lower[j];
                    sys.upper[j] = -theta * dt * op.upper[j];
                    sys.diag[j] = 1.0 - theta * dt * op.diag[j];
                    rhs[j] = base_rhs[j] + theta * dt * src[j];
                }
                if want_residual {
                    sys.apply(&iterate, &mut next);
                    residual[k] = next
                        .iter()
                        .zip(&rhs)
                        .map(|(a, b)| (a - b) / dt * d_new)
                        .collect();
                }
                if k == 0 {
                    first_step = Some((sys.clone(), rhs.clone()));
                }
            }
            values[k] = iterate;
        }
        Ok(Solution {
            values,
            residual,
            first_step,

        })
    }
}
