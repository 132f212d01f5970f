//! Support function of the ambiguity rectangle and the distance from a
//! volatility-scaled gradient to the constraint image `B = σᵀA`.
//!
//! For the rectangle `O₁` the support function is
//! `δ(w) = Σ κ̄ᵢ wᵢ⁺ + κ̲ᵢ wᵢ⁻`, so `d(z̄) = min_{z ∈ B} δ(z̄ + z)` is a
//! small linear program. Diagonal `σ` makes `B` an axis-aligned box and the
//! problem separates per coordinate. Otherwise the minimum sits on a vertex
//! of the arrangement cut out by `{wᵢ = 0}` and the finite bounds of `A`,
//! and we enumerate those vertices.

use nalgebra::{DMatrix, DVector};

use crate::error::{PricerError, Result};
use crate::model::{AmbiguityRectangle, ConstraintSpec};

const DIAGONAL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    /// Minimizer `z ∈ B`.
    pub argmin_z: Vec<f64>,
    /// The same minimizer as a position `π = (σᵀ)⁻¹ z ∈ A`.
    pub argmin_pi: Vec<f64>,
}

/// `δ(w) = Σ κ̄ᵢ wᵢ⁺ + κ̲ᵢ wᵢ⁻`.
pub fn support_value(w: &[f64], amb: &AmbiguityRectangle) -> Result<f64> {
    if w.len() != amb.dim() {
        return Err(PricerError::DimensionMismatch { expected: amb.dim(), got: w.len() });
    }
    Ok(support_unchecked(w, amb))
}

fn support_unchecked(w: &[f64], amb: &AmbiguityRectangle) -> f64 {
    w.iter()
        .zip(amb.kappa_hi.iter().zip(&amb.kappa_lo))
        .map(|(&x, (&hi, &lo))| hi * x.max(0.0) + lo * (-x).max(0.0))
        .sum()
}

/// A maximizing kernel `ξ ∈ O₁` for `ξᵀw`; zero where `wᵢ = 0`.
pub fn worst_case_kernel(w: &[f64], amb: &AmbiguityRectangle) -> Vec<f64> {
    w.iter()
        .zip(amb.kappa_hi.iter().zip(&amb.kappa_lo))
        .map(|(&x, (&hi, &lo))| {
            if x > 0.0 {
                hi
            } else if x < 0.0 {
                -lo
            } else {
                0.0
            }
        })
        .collect()
}

fn check_dims(
    zbar: &[f64],
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    sigma: &DMatrix<f64>,
) -> Result<usize> {
    let n = zbar.len();
    if amb.dim() != n {
        return Err(PricerError::DimensionMismatch { expected: n, got: amb.dim() });
    }
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(PricerError::DimensionMismatch { expected: n, got: sigma.nrows() });
    }
    cons.check_dim(n)?;
    Ok(n)
}

fn is_diagonal(sigma: &DMatrix<f64>) -> bool {
    let scale = sigma.amax().max(1.0);
    (0..sigma.nrows()).all(|i| {
        (0..sigma.ncols()).all(|j| i == j || sigma[(i, j)].abs() <= DIAGONAL_TOL * scale)
    })
}

/// Frozen linearization of the one-dimensional distance: on a neighbourhood
/// of `z̄`, `d(z̄) = kernel · (z̄ + shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPolicy {
    pub kernel: f64,
    pub shift: f64,
}

impl ScalarPolicy {
    pub fn value(&self, zbar: f64) -> f64 {
        self.kernel * (zbar + self.shift)
    }
}

/// One-dimensional distance data: `B = [z_lo, z_hi]` with `z_lo ≤ 0 ≤ z_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarDistance {
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl ScalarDistance {
    /// Builds the scalar problem for a single asset with volatility `sigma > 0`.
    pub fn new(amb: &AmbiguityRectangle, cons: &ConstraintSpec, sigma: f64) -> Result<Self> {
        if amb.dim() != 1 {
            return Err(PricerError::DimensionMismatch { expected: 1, got: amb.dim() });
        }
        cons.check_dim(1)?;
        if !(sigma > 0.0) {
            return Err(PricerError::InvalidInput(format!("volatility must be positive, got {sigma}")));
        }
        let (lo, hi) = cons.bounds(0);
        Ok(Self {
            kappa_lo: amb.kappa_lo[0],
            kappa_hi: amb.kappa_hi[0],
            z_lo: scale_bound(sigma, lo),
            z_hi: scale_bound(sigma, hi),
        })
    }

    /// Minimizer `z` of `δ(z̄ + z)` over `[z_lo, z_hi]`, preferring `z̄ + z`
    /// closest to zero.
    pub fn argmin(&self, zbar: f64) -> f64 {
        (-zbar).clamp(self.z_lo, self.z_hi)
    }

    pub fn value(&self, zbar: f64) -> f64 {
        let w = zbar + self.argmin(zbar);
        self.kappa_hi * w.max(0.0) + self.kappa_lo * (-w).max(0.0)
    }

    /// The affine piece of `d` active at `z̄`.
    pub fn policy(&self, zbar: f64) -> ScalarPolicy {
        if zbar + self.z_lo > 0.0 {
            ScalarPolicy { kernel: self.kappa_hi, shift: self.z_lo }
        } else if zbar + self.z_hi < 0.0 {
            ScalarPolicy { kernel: -self.kappa_lo, shift: self.z_hi }
        } else {
            ScalarPolicy { kernel: 0.0, shift: 0.0 }
        }
    }
}

fn scale_bound(sigma: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        sigma * bound
    }
}

/// Closed form for diagonal `σ`; errors with [`PricerError::NonAxisAligned`]
/// otherwise, unless `A` is unconstrained.
pub fn closed_form_distance(
    zbar: &[f64],
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    sigma: &DMatrix<f64>,
) -> Result<DistanceResult> {
    let n = check_dims(zbar, amb, cons, sigma)?;
    if matches!(cons, ConstraintSpec::Unconstrained) {
        let argmin_z: Vec<f64> = zbar.iter().map(|z| -z).collect();
        let argmin_pi = solve_transpose(sigma, &argmin_z)?;
        return Ok(DistanceResult { value: 0.0, argmin_z, argmin_pi });
    }
    if !is_diagonal(sigma) {
        return Err(PricerError::NonAxisAligned);
    }
    let mut argmin_z = Vec::with_capacity(n);
    let mut argmin_pi = Vec::with_capacity(n);
    for i in 0..n {
        let s = sigma[(i, i)];
        let (lo, hi) = cons.bounds(i);
        let z = (-zbar[i]).clamp(scale_bound(s, lo), scale_bound(s, hi));
        argmin_z.push(z);
        argmin_pi.push((z / s).clamp(lo, hi));
    }
    let w: Vec<f64> = zbar.iter().zip(&argmin_z).map(|(a, b)| a + b).collect();
    Ok(DistanceResult {
        value: support_unchecked(&w, amb),
        argmin_z,
        argmin_pi,
    })
}

/// `d(z̄, σᵀA)` and a minimizer, exact for every supported constraint.
pub fn distance_to_constraint(
    zbar: &[f64],
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    sigma: &DMatrix<f64>,
) -> Result<DistanceResult> {
    match closed_form_distance(zbar, amb, cons, sigma) {
        Err(PricerError::NonAxisAligned) => vertex_distance(zbar, amb, cons, sigma),
        other => other,
    }
}

fn solve_transpose(sigma: &DMatrix<f64>, z: &[f64]) -> Result<Vec<f64>> {
    let st = sigma.transpose();
    let rhs = DVector::from_column_slice(z);
    st.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| PricerError::InvalidInput("volatility matrix is singular".into()))
}

#[derive(Clone, Copy)]
enum Tight {
    ZeroExposure(usize),
    Bound(usize, f64),
}

/// Minimum over all vertices of the arrangement `{wᵢ = 0} ∪ {πⱼ = bound}`
/// restricted to `A`.
fn vertex_distance(
    zbar: &[f64],
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    sigma: &DMatrix<f64>,
) -> Result<DistanceResult> {
    let n = zbar.len();
    let st = sigma.transpose();
    let mut candidates: Vec<Tight> = (0..n).map(Tight::ZeroExposure).collect();
    for j in 0..n {
        let (lo, hi) = cons.bounds(j);
        if lo.is_finite() {
            candidates.push(Tight::Bound(j, lo));
        }
        if hi.is_finite() && hi != lo {
            candidates.push(Tight::Bound(j, hi));
        }
    }

    let feas_tol = 1e-10;
    let mut best: Option<(f64, f64, f64, Vec<f64>, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (row, &c) in subset.iter().enumerate() {
            match candidates[c] {
                Tight::ZeroExposure(i) => {
                    for k in 0..n {
                        a[(row, k)] = st[(i, k)];
                    }
                    b[row] = -zbar[i];
                }
                Tight::Bound(j, v) => {
                    a[(row, j)] = 1.0;
                    b[row] = v;
                }
            }
        }
        if let Some(pi) = a.lu().solve(&b) {
            let feasible = pi.iter().enumerate().all(|(j, &p)| {
                let (lo, hi) = cons.bounds(j);
                p.is_finite() && p >= lo - feas_tol * (1.0 + lo.abs()) && p <= hi + feas_tol * (1.0 + hi.abs())
            });
            if feasible {
                let pi: Vec<f64> = pi
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| {
                        let (lo, hi) = cons.bounds(j);
                        p.clamp(lo, hi)
                    })
                    .collect();
                let z: Vec<f64> = (st.clone() * DVector::from_column_slice(&pi)).iter().copied().collect();
                let w: Vec<f64> = zbar.iter().zip(&z).map(|(a, b)| a + b).collect();
                let value = support_unchecked(&w, amb);
                let wnorm = w.iter().map(|x| x * x).sum::<f64>();
                let znorm = z.iter().map(|x| x * x).sum::<f64>();
                let better = match &best {
                    None => true,
                    Some((bv, bw, bz, _, _)) => {
                        let tie = 1e-12 * (1.0 + bv.abs());
                        value < bv - tie
                            || (value <= bv + tie && (wnorm < bw - 1e-18 || (wnorm <= bw + 1e-18 && znorm < *bz)))
                    }
                };
                if better {
                    best = Some((value, wnorm, znorm, z, pi));
                }
            }
        }
        if !next_combination(&mut subset, candidates.len()) {
            break;
        }
    }
    let (value, _, _, argmin_z, argmin_pi) =
        best.ok_or_else(|| PricerError::InvalidInput("no feasible vertex in constraint set".into()))?;
    Ok(DistanceResult { value, argmin_z, argmin_pi })
}

fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < m - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Tensor-grid search domain for [`brute_force_distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    /// Bounds of the position grid per coordinate, intersected with `A`.
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Points per coordinate on the kernel grid (including both ends).
    pub kernel_points: usize,
}

/// Exhaustive min over a position grid of the max over a kernel grid.
pub fn brute_force_distance(
    zbar: &[f64],
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    sigma: &DMatrix<f64>,
    grid: &SearchGrid,
) -> Result<DistanceResult> {
    let n = check_dims(zbar, amb, cons, sigma)?;
    if !(grid.step > 0.0) || grid.kernel_points < 2 || !(grid.hi >= grid.lo) {
        return Err(PricerError::EmptyGrid);
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let (lo, hi) = cons.bounds(j);
            let a = grid.lo.max(lo);
            let b = grid.hi.min(hi);
            if a > b {
                return Vec::new();
            }
            let count = ((b - a) / grid.step + 1e-9).floor() as usize;
            let mut pts: Vec<f64> = (0..=count).map(|k| a + k as f64 * grid.step).collect();
            if 0.0 >= a && 0.0 <= b && !pts.contains(&0.0) {
                pts.push(0.0);
            }
            pts
        })
        .collect();
    if axes.iter().any(|a| a.is_empty()) {
        return Err(PricerError::EmptyGrid);
    }
    let kernels: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let m = grid.kernel_points;
            let (a, b) = (-amb.kappa_lo[i], amb.kappa_hi[i]);
            (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect()
        })
        .collect();

    let st = sigma.transpose();
    let mut best_value = f64::INFINITY;
    let mut best_pi = vec![0.0; n];
    let mut idx = vec![0usize; n];
    let mut pi = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut kidx = vec![0usize; n];
    loop {
        for j in 0..n {
            pi[j] = axes[j][idx[j]];
        }
        for i in 0..n {
            w[i] = zbar[i] + (0..n).map(|k| st[(i, k)] * pi[k]).sum::<f64>();
        }
        // max over the kernel tensor grid
        kidx.iter_mut().for_each(|k| *k = 0);
        let mut inner = f64::NEG_INFINITY;
        loop {
            let v: f64 = (0..n).map(|i| kernels[i][kidx[i]] * w[i]).sum();
            inner = inner.max(v);
            if !advance(&mut kidx, |i| kernels[i].len()) {
                break;
            }
        }
        if inner < best_value {
            best_value = inner;
            best_pi.copy_from_slice(&pi);
        }
        if !advance(&mut idx, |j| axes[j].len()) {
            break;
        }
    }
    let argmin_z: Vec<f64> = (st * DVector::from_column_slice(&best_pi)).iter().copied().collect();
    Ok(DistanceResult { value: best_value, argmin_z, argmin_pi: best_pi })
}

fn advance(idx: &mut [usize], len: impl Fn(usize) -> usize) -> bool {
    for i in 0..idx.len() {
        idx[i] += 1;
        if idx[i] < len(i) {
            return true;
        }
        idx[i] = 0;
    }
    false
}
