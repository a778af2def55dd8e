use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries in `[-CLAMP_TOL, 0)` are treated as roundoff and set to zero.
pub const CLAMP_TOL: f64 = 1e-12;
pub const SUM_TOL: f64 = 1e-10;

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn x_ln_x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Nonnegative reals summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_clamp(values, CLAMP_TOL)
    }

    /// Like [`ProbabilityVector::new`] but with a caller-chosen clamp window
    /// for small negative entries.
    pub fn with_clamp(mut values: Vec<f64>, clamp: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidProbabilities(format!("entry {i} is not finite")));
            }
            if *v < 0.0 {
                if *v >= -clamp {
                    *v = 0.0;
                } else {
                    return Err(Error::InvalidProbabilities(format!("entry {i} = {v} is negative")));
                }
            }
            if *v > 1.0 + SUM_TOL {
                return Err(Error::InvalidProbabilities(format!("entry {i} = {v} exceeds 1")));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidProbabilities(format!("sum is {sum}")));
        }
        Ok(Self(values))
    }

    /// Normalizes nonnegative weights to unit sum.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidProbabilities("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    /// All mass on `index`.
    pub fn point(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::OutOfRange(format!("index {index} >= {n}")));
        }
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn total_variation(&self, other: &ProbabilityVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: other.len() });
        }
        Ok(0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Vec<f64> {
        p.0
    }
}

/// `-sum x ln x`, summed in ascending order of `x`.
///
/// Shared by the Shannon and von Neumann entropies so that a diagonal
/// density matrix and its probability vector give bit-identical results.
pub fn entropy_of(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    -v.into_iter().map(x_ln_x).sum::<f64>()
}

/// Shannon entropy `-sum p ln p` in nats.
pub fn shannon_entropy(p: &ProbabilityVector) -> f64 {
    entropy_of(p.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shannon_examples() {
        let p = ProbabilityVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(shannon_entropy(&p), 0.0);

        let u = ProbabilityVector::uniform(4).unwrap();
        assert!((shannon_entropy(&u) - 4f64.ln()).abs() < 1e-15);

        // -(0.9 ln 0.9 + 0.1 ln 0.1)
        let p = ProbabilityVector::new(vec![0.9, 0.1]).unwrap();
        assert!((shannon_entropy(&p) - 0.325_082_973_391_448_2).abs() < 1e-12);
    }

    #[test]
    fn clamps_tiny_negatives_only() {
        let p = ProbabilityVector::new(vec![1.0, -5e-13]).unwrap();
        assert_eq!(p[1], 0.0);
        assert!(ProbabilityVector::new(vec![1.1, -0.1]).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.4]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(ProbabilityVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn normalized_rejects_zero_total() {
        assert_eq!(ProbabilityVector::normalized(&[0.0, 0.0]), Err(Error::DegenerateWeights));
        let p = ProbabilityVector::normalized(&[1.0, 3.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn total_variation_distance() {
        let a = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let b = ProbabilityVector::uniform(2).unwrap();
        assert!((a.total_variation(&b).unwrap() - 0.5).abs() < 1e-15);
    }
}
