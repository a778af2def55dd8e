//! The measurement transition and Born-rule outcome selection.
//!
//! A measurement happens in two steps. [`process1`] maps a state to the
//! mixture that is diagonal in the absorber basis (all coherence between
//! basis states is removed). [`collapse_sample`] then actualizes one outcome
//! with its Born weight. [`measure`] runs both on a pure state.

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, C64};
use crate::probability::ProbabilityVector;
use crate::rng::SimRng;
use crate::state::{DensityMatrix, StateVector};

pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Weights at or below this are never selected by [`collapse_sample`].
pub const ZERO_WEIGHT: f64 = 1e-15;

/// Orthonormal basis stored as the columns of a unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    columns: CMatrix,
}

impl MeasurementBasis {
    pub fn from_unitary(columns: CMatrix) -> Result<Self> {
        let d = linalg::ensure_square(&columns)?;
        let gram = columns.adjoint() * &columns;
        let err = linalg::max_abs_diff(&gram, &CMatrix::identity(d, d));
        if err > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(err));
        }
        Ok(Self { columns })
    }

    pub fn from_states(states: &[StateVector]) -> Result<Self> {
        let d = states.first().map_or(0, StateVector::dim);
        if states.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: states.len() });
        }
        let mut m = CMatrix::zeros(d, d);
        for (j, s) in states.iter().enumerate() {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: s.dim() });
            }
            m.set_column(j, s.amplitudes());
        }
        Self::from_unitary(m)
    }

    pub fn computational(dim: usize) -> Result<Self> {
        Self::from_unitary(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }

    pub fn state(&self, k: usize) -> StateVector {
        StateVector::from_vector_unchecked(self.columns.column(k).into_owned())
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: dim });
        }
        Ok(())
    }
}

/// Result of the second measurement step.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOutcome {
    pub index: usize,
    /// `|X_k><X_k|`.
    pub projector: DensityMatrix,
    /// Born weight of the realized outcome.
    pub weight: f64,
}

/// `|<X_k|psi>|^2` for every basis element.
pub fn born_weights(psi: &StateVector, basis: &MeasurementBasis) -> Result<ProbabilityVector> {
    basis.check(psi.dim())?;
    let amps = basis.columns().adjoint() * psi.amplitudes();
    ProbabilityVector::new(amps.iter().map(C64::norm_sqr).collect())
}

/// Diagonal `<X_i|rho|X_i>` of a (possibly mixed) state in the basis.
pub fn basis_populations(rho: &DensityMatrix, basis: &MeasurementBasis) -> Result<ProbabilityVector> {
    basis.check(rho.dim())?;
    let v = basis.columns();
    let in_basis = v.adjoint() * rho.entries() * v;
    ProbabilityVector::new(in_basis.diagonal().iter().map(|z| z.re).collect())
}

/// Measurement transition `rho -> sum_i <X_i|rho|X_i> |X_i><X_i|`.
///
/// For a pure input `|psi><psi|` the weights are the Born weights of `psi`.
/// Mixed inputs are handled by the same pinching map.
pub fn process1(rho: &DensityMatrix, basis: &MeasurementBasis) -> Result<DensityMatrix> {
    let p = basis_populations(rho, basis)?;
    let v = basis.columns();
    let d = v.nrows();
    let diag = CMatrix::from_fn(d, d, |i, j| if i == j { c64(p[i], 0.0) } else { C64::default() });
    DensityMatrix::new(linalg::hermitize(&(v * diag * v.adjoint())))
}

/// Same map as [`process1`]; the name used when the transition is caused by
/// environmental absorbers rather than a deliberate measurement.
pub fn decohere(rho: &DensityMatrix, basis: &MeasurementBasis) -> Result<DensityMatrix> {
    process1(rho, basis)
}

/// Draws an index with probability proportional to `weights`.
///
/// Inverse CDF over ascending index order with one uniform draw. Weights
/// `<= ZERO_WEIGHT` are never selected. The weights need not be normalized.
pub fn collapse_sample(weights: &[f64], rng: &mut SimRng) -> Result<usize> {
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidProbabilities(format!("weight {i} = {}", weights[i])));
    }
    let live = |w: f64| if w > ZERO_WEIGHT { w } else { 0.0 };
    let total: f64 = weights.iter().map(|&w| live(w)).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let target = rng.uniform() * total;
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        let w = live(w);
        if w == 0.0 {
            continue;
        }
        cum += w;
        last = i;
        if target < cum {
            return Ok(i);
        }
    }
    // target landed past the accumulated sum through roundoff
    Ok(last)
}

/// Full two-step measurement of a pure state.
pub fn measure(
    psi: &StateVector,
    basis: &MeasurementBasis,
    rng: &mut SimRng,
) -> Result<(CollapseOutcome, StateVector)> {
    let weights = born_weights(psi, basis)?;
    let index = collapse_sample(weights.as_slice(), rng)?;
    let post = basis.state(index);
    let projector = DensityMatrix::new(post.projector())?;
    Ok((CollapseOutcome { index, projector, weight: weights[index] }, post))
}

/// Pearson chi-square statistic of observed counts against expected weights.
///
/// Categories with zero expected weight are skipped; they contribute
/// nothing if unobserved and make the statistic infinite otherwise.
pub fn chi_square_statistic(counts: &[u64], weights: &ProbabilityVector) -> Result<f64> {
    if counts.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), actual: counts.len() });
    }
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    for (&c, &w) in counts.iter().zip(weights.as_slice()) {
        let expected = w * n as f64;
        if expected == 0.0 {
            if c > 0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        stat += (c as f64 - expected).powi(2) / expected;
    }
    Ok(stat)
}
