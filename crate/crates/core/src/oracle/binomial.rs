use crate::error::{PricerError, Result};
use crate::model::{ExerciseStyle, Payoff};

struct Tree {
    up: f64,
    down: f64,
    p: f64,
    disc: f64,
    dt: f64,
}

fn tree(r: f64, q: f64, sigma: f64, horizon: f64, steps: usize) -> Result<Tree> {
    if steps == 0 {
        return Err(PricerError::InvalidInput("binomial tree needs at least one step".into()));
    }
    if !(sigma > 0.0 && horizon > 0.0) || !r.is_finite() || !q.is_finite() {
        return Err(PricerError::InvalidInput(format!(
            "binomial tree needs positive volatility and horizon (sigma={sigma}, T={horizon})"
        )));
    }
    let dt = horizon / steps as f64;
    let a = sigma * dt.sqrt();
    let growth = ((r - q) * dt).exp();
    let (up, down) = (a.exp(), (-a).exp());
    let p = (growth - down) / (up - down);
    if (0.0..=1.0).contains(&p) {
        return Ok(Tree { up, down, p, disc: (-r * dt).exp(), dt });
    }
    // drift-centred lattice keeps p in (0,1) when σ√dt is tiny against the drift
    let up = ((r - q) * dt + a).exp();
    let down = ((r - q) * dt - a).exp();
    let p = -(-a).exp_m1() / (2.0 * a.sinh());
    Ok(Tree { up, down, p, disc: (-r * dt).exp(), dt })
}

/// Recombining-tree price with continuous dividend yield `q`; American
/// style compares continuation against the payoff at every node.
pub fn binomial_american(
    s0: f64,
    r: f64,
    q: f64,
    sigma: f64,
    horizon: f64,
    steps: usize,
    payoff: &Payoff,
    style: ExerciseStyle,
) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(PricerError::InvalidInput(format!("spot must be positive, got {s0}")));
    }
    payoff.validate()?;
    let t = tree(r, q, sigma, horizon, steps)?;
    let mut v: Vec<f64> = (0..=steps).map(|j| payoff.eval(node(s0, &t, steps, j))).collect();
    let ratio = t.up / t.down;
    for i in (0..steps).rev() {
        let mut spot = node(s0, &t, i, 0);
        for j in 0..=i {
            let cont = t.disc * (t.p * v[j + 1] + (1.0 - t.p) * v[j]);
            v[j] = match style {
                ExerciseStyle::European => cont,
                ExerciseStyle::American => cont.max(payoff.eval(spot)),
            };
            spot *= ratio;
        }
    }
    Ok(v[0])
}

/// Spot at step `i` after `j` up-moves.
fn node(s0: f64, t: &Tree, i: usize, j: usize) -> f64 {
    s0 * t.up.powi(j as i32) * t.down.powi((i - j) as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeBoundary {
    pub t: f64,
    /// Geometric midpoints between adjacent nodes where exercise switches.
    pub s_star: Vec<f64>,
}

/// Early-exercise boundary of an American tree, one entry per step that
/// has both exercise and continuation nodes.
pub fn binomial_boundary(
    s0: f64,
    r: f64,
    q: f64,
    sigma: f64,
    horizon: f64,
    steps: usize,
    payoff: &Payoff,
) -> Result<Vec<TreeBoundary>> {
    payoff.validate()?;
    let t = tree(r, q, sigma, horizon, steps)?;
    let mut v: Vec<f64> = (0..=steps).map(|j| payoff.eval(node(s0, &t, steps, j))).collect();
    let mut out = Vec::new();
    for i in (0..steps).rev() {
        let mut exercised = vec![false; i + 1];
        let mut spot = node(s0, &t, i, 0);
        for j in 0..=i {
            let cont = t.disc * (t.p * v[j + 1] + (1.0 - t.p) * v[j]);
            let ex = payoff.eval(spot);
            spot *= t.up / t.down;
            exercised[j] = ex > 0.0 && ex >= cont;
            v[j] = cont.max(ex);
        }
        let s_star: Vec<f64> = exercised
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(j, _)| (node(s0, &t, i, j) * node(s0, &t, i, j + 1)).sqrt())
            .collect();
        if !s_star.is_empty() {
            out.push(TreeBoundary { t: i as f64 * t.dt, s_star });
        }
    }
    out.reverse();
    Ok(out)
}
