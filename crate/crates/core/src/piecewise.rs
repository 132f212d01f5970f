//! Right-continuous piecewise-constant functions of time.

use crate::error::{PricerError, Result};

/// A function of time that is constant on `[starts[i], starts[i + 1])`.
///
/// The first piece always starts at `t = 0` and the last piece extends to
/// infinity, so evaluation past the horizon returns the last value.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant<T> {
    starts: Vec<f64>,
    values: Vec<T>,
}

impl<T: Clone> PiecewiseConstant<T> {
    pub fn constant(value: T) -> Self {
        Self {
            starts: vec![0.0],
            values: vec![value],
        }
    }

    /// Builds from `(start, value)` pairs. Starts must be strictly increasing
    /// and the first one must be zero.
    pub fn from_pieces(pieces: Vec<(f64, T)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(PricerError::InvalidInput("piecewise function has no pieces".into()));
        }
        if pieces[0].0 != 0.0 {
            return Err(PricerError::InvalidInput(
                "first piece of a piecewise function must start at t=0".into(),
            ));
        }
        if pieces.windows(2).any(|w| !(w[1].0 > w[0].0) || !w[1].0.is_finite()) {
            return Err(PricerError::InvalidInput(
                "piece start times must be finite and strictly increasing".into(),
            ));
        }
        let (starts, values) = pieces.into_iter().unzip();
        Ok(Self { starts, values })
    }

    pub fn value_at(&self, t: f64) -> &T {
        let idx = self.starts.partition_point(|&s| s <= t);
        &self.values[idx.saturating_sub(1)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    /// Interior breakpoints strictly inside `(a, b)`.
    pub fn breakpoints_in(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.starts.iter().copied().filter(move |&s| s > a && s < b)
    }

    /// Splits `[a, b]` at the breakpoints and yields `(lo, hi, value)` per piece.
    pub fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64, T)> {
        let mut out = Vec::new();
        if b <= a {
            return out;
        }
        let mut lo = a;
        for bp in self.breakpoints_in(a, b).chain(std::iter::once(b)) {
            out.push((lo, bp, self.value_at(lo).clone()));
            lo = bp;
        }
        out
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> PiecewiseConstant<U> {
        PiecewiseConstant {
            starts: self.starts.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl PiecewiseConstant<f64> {
    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.segments(a, b)
            .into_iter()
            .map(|(lo, hi, v)| v * (hi - lo))
            .sum()
    }

    /// Average value on `[a, b]`; the point value when the interval is empty.
    pub fn average(&self, a: f64, b: f64) -> f64 {
        if b > a {
            self.integral(a, b) / (b - a)
        } else {
            *self.value_at(a)
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_across_breakpoints() {
        let f = PiecewiseConstant::from_pieces(vec![(0.0, 0.05), (0.5, 0.01)]).unwrap();
        assert!((f.integral(0.0, 1.0) - 0.03).abs() < 1e-15);
        assert!((f.integral(0.25, 0.75) - (0.25 * 0.05 + 0.25 * 0.01)).abs() < 1e-15);
        assert_eq!(*f.value_at(0.5), 0.01);
        assert_eq!(*f.value_at(0.4999), 0.05);
        assert_eq!(f.integral(0.3, 0.3), 0.0);
    }

    #[test]
    fn rejects_bad_pieces() {
        assert!(PiecewiseConstant::from_pieces(vec![(0.1, 1.0)]).is_err());
        assert!(PiecewiseConstant::from_pieces(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(PiecewiseConstant::<f64>::from_pieces(vec![]).is_err());
    }
}
