use nalgebra::{DMatrix, DVector};

use crate::error::{PricerError, Result};

/// Total-degree monomials in standardized log-prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialBasis {
    exponents: Vec<Vec<u32>>,
}

impl PolynomialBasis {
    pub fn new(dim: usize, degree: u32) -> Self {
        let mut exponents = Vec::new();
        let mut current = vec![0u32; dim];
        collect(&mut exponents, &mut current, 0, degree);
        exponents.sort_by_key(|e| e.iter().sum::<u32>());
        Self { exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product();
        }
    }

    /// Least-squares fitted values of each target on the basis evaluated at
    /// `features[p]` (one feature vector per path).
    pub fn fit(&self, features: &[Vec<f64>], targets: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let paths = features.len();
        let nb = self.len();
        if paths < 4 * nb {
            return Err(PricerError::IllConditioned(format!(
                "{paths} paths cannot support {nb} basis functions"
            )));
        }
        let dim = features[0].len();
        // standardize each coordinate
        let mut mean = vec![0.0; dim];
        let mut sd = vec![0.0; dim];
        for f in features {
            for i in 0..dim {
                mean[i] += f[i];
            }
        }
        mean.iter_mut().for_each(|m| *m /= paths as f64);
        for f in features {
            for i in 0..dim {
                sd[i] += (f[i] - mean[i]).powi(2);
            }
        }
        sd.iter_mut().for_each(|s| *s = (*s / paths as f64).sqrt().max(1e-300));

        let mut design = DMatrix::zeros(paths, nb);
        let mut row = vec![0.0; nb];
        let mut z = vec![0.0; dim];
        for (p, f) in features.iter().enumerate() {
            for i in 0..dim {
                z[i] = (f[i] - mean[i]) / sd[i];
            }
            self.eval_into(&z, &mut row);
            for (c, v) in row.iter().enumerate() {
                design[(p, c)] = *v;
            }
        }
        let gram = design.tr_mul(&design);
        let eig = gram.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        if !(lo > 1e-13 * hi) {
            return Err(PricerError::IllConditioned(format!(
                "normal equations have condition number {:.3e}",
                hi / lo.max(f64::MIN_POSITIVE)
            )));
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| PricerError::IllConditioned("Gram matrix is not positive definite".into()))?;
        targets
            .iter()
            .map(|y| {
                let y = DVector::from_column_slice(y);
                let coef = chol.solve(&design.tr_mul(&y));
                Ok((&design * coef).iter().copied().collect())
            })
            .collect()
    }
}

fn collect(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, idx: usize, left: u32) {
    if idx == current.len() {
        out.push(current.clone());
        return;
    }
    for p in 0..=left {
        current[idx] = p;
        collect(out, current, idx + 1, left - p);
    }
    current[idx] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(PolynomialBasis::new(1, 4).len(), 5);
        assert_eq!(PolynomialBasis::new(2, 4).len(), 15);
        assert_eq!(PolynomialBasis::new(3, 2).len(), 10);
    }

    #[test]
    fn reproduces_polynomials_exactly() {
        let feats: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 50.0]).collect();
        let y: Vec<f64> = feats.iter().map(|f| 1.0 + 2.0 * f[0] - 0.5 * f[0].powi(3)).collect();
        let fit = PolynomialBasis::new(1, 3).fit(&feats, &[&y]).unwrap();
        for (a, b) in fit[0].iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn flags_degenerate_designs() {
        let feats: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0]).collect();
        let y = vec![0.0; 10];
        assert!(PolynomialBasis::new(1, 6).fit(&feats, &[&y]).is_err());
        let feats: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 2) as f64]).collect();
        let y = vec![0.0; 100];
        assert!(matches!(
            PolynomialBasis::new(1, 3).fit(&feats, &[&y]),
            Err(PricerError::IllConditioned(_))
        ));
    }
}
