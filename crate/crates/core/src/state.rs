//! Quantum states and entropy-conserving (unitary) dynamics.
//!
//! Units: hbar = 1, entropies in nats. A density matrix evolves as
//! `d rho/dt = -i [H, rho]`, an observable as `dO/dt = +i [H, O]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, eig_hermitian, CMatrix, CVector, Spectrum, C64, HERMITIAN_TOL};
use crate::probability::{entropy_of, ProbabilityVector};

pub const NORM_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues of a density matrix in `[-PSD_TOL, 0)` are roundoff and are
/// clamped to zero; anything more negative is a hard failure.
pub const PSD_TOL: f64 = 1e-10;

/// Normalized ket.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let d = amplitudes.len();
        if d == 0 || d > crate::MAX_DIM {
            return Err(Error::DimensionOutOfRange(d));
        }
        let v = CVector::from_vec(amplitudes);
        let n2 = v.norm_squared();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self { amplitudes: v })
    }

    /// Real amplitudes, no normalization performed.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| c64(x, 0.0)).collect())
    }

    /// Rescales any nonzero vector to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let v = CVector::from_vec(amplitudes);
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n * n));
        }
        Self::new((v / c64(n, 0.0)).iter().copied().collect())
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::OutOfRange(format!("basis index {index} >= dimension {dim}")));
        }
        let mut a = vec![C64::default(); dim];
        a[index] = c64(1.0, 0.0);
        Self::new(a)
    }

    pub(crate) fn from_vector_unchecked(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|psi><psi|` without validation.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Hermitian, positive-semidefinite, unit-trace matrix.
///
/// The clamped eigenvalues are computed on construction and cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityJson", into = "DensityJson")]
pub struct DensityMatrix {
    entries: CMatrix,
    eigenvalues: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DensityJson(#[serde(with = "linalg::json")] CMatrix);

impl TryFrom<DensityJson> for DensityMatrix {
    type Error = Error;
    fn try_from(j: DensityJson) -> Result<Self> {
        DensityMatrix::new(j.0)
    }
}

impl From<DensityMatrix> for DensityJson {
    fn from(r: DensityMatrix) -> Self {
        DensityJson(r.entries)
    }
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        linalg::ensure_hermitian(&entries, HERMITIAN_TOL)?;
        let tr = linalg::trace(&entries);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let entries = linalg::hermitize(&entries);
        let mut eigenvalues = if is_diagonal(&entries) {
            // exact spectrum, no iteration roundoff
            let mut d: Vec<f64> = entries.diagonal().iter().map(|z| z.re).collect();
            d.sort_by(f64::total_cmp);
            d
        } else {
            eig_hermitian(&entries)?.eigenvalues
        };
        let min = eigenvalues[0];
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
        Ok(Self { entries, eigenvalues })
    }

    /// Diagonal matrix `sum_i p_i |i><i|`.
    pub fn from_diagonal(p: &ProbabilityVector) -> Result<Self> {
        let d = p.len();
        let m = CMatrix::from_fn(d, d, |i, j| if i == j { c64(p[i], 0.0) } else { C64::default() });
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::from_diagonal(&ProbabilityVector::uniform(dim)?)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Clamped eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.entries).re
    }

    /// Real diagonal in the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    /// `Tr(rho O)`.
    pub fn expectation(&self, o: &Observable) -> Result<f64> {
        check_dims(self.dim(), o.dim())?;
        Ok(linalg::trace(&(&self.entries * o.entries())).re)
    }
}

/// Hermitian generator, with its spectrum cached for propagation.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    entries: CMatrix,
    spectrum: Spectrum,
}

impl Hamiltonian {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let spectrum = eig_hermitian(&entries)?;
        Ok(Self { entries: linalg::hermitize(&entries), spectrum })
    }

    pub fn diagonal(energies: &[f64]) -> Result<Self> {
        let d = energies.len();
        Self::new(CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                c64(energies[i], 0.0)
            } else {
                C64::default()
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `U = exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        linalg::propagator(&self.spectrum, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    entries: CMatrix,
}

impl Observable {
    pub fn new(entries: CMatrix) -> Result<Self> {
        linalg::ensure_hermitian(&entries, HERMITIAN_TOL)?;
        Ok(Self { entries: linalg::hermitize(&entries) })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == C64::default()))
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `|psi><psi|`.
pub fn density_from_pure(psi: &StateVector) -> Result<DensityMatrix> {
    DensityMatrix::new(psi.projector())
}

/// `sum_i p_i |psi_i><psi_i|`; the states need not be orthogonal.
pub fn mix_states(states: &[StateVector], probs: &ProbabilityVector) -> Result<DensityMatrix> {
    check_dims(states.len(), probs.len())?;
    let d = states[0].dim();
    let mut acc = CMatrix::zeros(d, d);
    for (psi, &p) in states.iter().zip(probs.as_slice()) {
        check_dims(d, psi.dim())?;
        acc += psi.projector() * c64(p, 0.0);
    }
    DensityMatrix::new(acc)
}

/// `U rho U^dagger` with `U = exp(-i H t)`.
pub fn evolve_unitary(rho: &DensityMatrix, h: &Hamiltonian, t: f64) -> Result<DensityMatrix> {
    check_dims(rho.dim(), h.dim())?;
    let u = h.propagator(t);
    let out = &u * rho.entries() * u.adjoint();
    DensityMatrix::new(linalg::hermitize(&out))
}

/// Heisenberg-picture evolution `U^dagger O U`.
pub fn evolve_observable(o: &Observable, h: &Hamiltonian, t: f64) -> Result<Observable> {
    check_dims(o.dim(), h.dim())?;
    let u = h.propagator(t);
    let out = u.adjoint() * o.entries() * &u;
    Observable::new(linalg::hermitize(&out))
}

/// Von Neumann entropy `-Tr(rho ln rho)` in nats.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of(rho.eigenvalues())
}

/// `Tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    rho.entries().iter().map(|z| z.norm_sqr()).sum()
}
