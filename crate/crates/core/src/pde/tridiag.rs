/// Tridiagonal system `lower[j]·x[j−1] + diag[j]·x[j] + upper[j]·x[j+1] = rhs[j]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Thomas algorithm; `scratch` must have the system's length.
    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let n = self.len();
        let mut denom = self.diag[0];
        scratch[0] = self.upper[0] / denom;
        out[0] = rhs[0] / denom;
        for j in 1..n {
            denom = self.diag[j] - self.lower[j] * scratch[j - 1];
            scratch[j] = self.upper[j] / denom;
            out[j] = (rhs[j] - self.lower[j] * out[j - 1]) / denom;
        }
        for j in (0..n - 1).rev() {
            out[j] -= scratch[j] * out[j + 1];
        }
    }

    /// `A·x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for j in 0..n {
            let mut v = self.diag[j] * x[j];
            if j > 0 {
                v += self.lower[j] * x[j - 1];
            }
            if j + 1 < n {
                v += self.upper[j] * x[j + 1];
            }
            out[j] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_roundtrip() {
        let n = 7;
        let mut a = Tridiagonal::zeros(n);
        for j in 0..n {
            a.lower[j] = -1.0 - 0.1 * j as f64;
            a.diag[j] = 4.0 + j as f64;
            a.upper[j] = -0.5;
        }
        let x: Vec<f64> = (0..n).map(|j| (j as f64).sin() + 2.0).collect();
        let mut b = vec![0.0; n];
        a.apply(&x, &mut b);
        let mut y = vec![0.0; n];
        let mut s = vec![0.0; n];
        a.solve_into(&b, &mut y, &mut s);
        for j in 0..n {
            assert!((x[j] - y[j]).abs() < 1e-13);
        }
    }
}
