//! Random test ensembles: density matrices, Hamiltonians, bases, generators.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::{self, c64, CMatrix};
use crate::master::{build_master_operator, MasterOperator, RateMatrix};
use crate::measurement::MeasurementBasis;
use crate::probability::ProbabilityVector;
use crate::rng::SimRng;
use crate::state::{DensityMatrix, Hamiltonian, StateVector};

/// Complex Ginibre matrix with standard normal entries.
pub fn ginibre(dim: usize, rng: &mut SimRng) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| c64(rng.normal(), rng.normal()))
}

pub fn random_hermitian(dim: usize, rng: &mut SimRng) -> CMatrix {
    linalg::hermitize(&ginibre(dim, rng))
}

/// `G G^dagger / Tr`, full rank almost surely.
pub fn random_density(dim: usize, rng: &mut SimRng) -> Result<DensityMatrix> {
    let g = ginibre(dim, rng);
    let w = &g * g.adjoint();
    let tr = linalg::trace(&w).re;
    DensityMatrix::new(linalg::hermitize(&(w / c64(tr, 0.0))))
}

pub fn random_pure(dim: usize, rng: &mut SimRng) -> Result<StateVector> {
    StateVector::normalized((0..dim).map(|_| c64(rng.normal(), rng.normal())).collect())
}

/// Mixture of `rank` random pure states with random weights.
pub fn random_density_of_rank(dim: usize, rank: usize, rng: &mut SimRng) -> Result<DensityMatrix> {
    let states = (0..rank).map(|_| random_pure(dim, rng)).collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = (0..rank).map(|_| rng.uniform() + 1e-3).collect();
    crate::state::mix_states(&states, &ProbabilityVector::normalized(&weights)?)
}

pub fn random_hamiltonian(dim: usize, rng: &mut SimRng) -> Result<Hamiltonian> {
    Hamiltonian::new(random_hermitian(dim, rng))
}

/// Eigenbasis of a random Hermitian matrix.
pub fn random_basis(dim: usize, rng: &mut SimRng) -> Result<MeasurementBasis> {
    let s = linalg::eig_hermitian(&random_hermitian(dim, rng))?;
    MeasurementBasis::from_unitary(s.eigenvectors)
}

/// Generator with every off-diagonal rate in `[lo, hi)`, hence irreducible.
pub fn random_generator(n: usize, lo: f64, hi: f64, symmetric: bool, rng: &mut SimRng) -> Result<MasterOperator> {
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i != j && (!symmetric || i < j) {
                r[(i, j)] = lo + (hi - lo) * rng.uniform();
                if symmetric {
                    r[(j, i)] = r[(i, j)];
                }
            }
        }
    }
    Ok(build_master_operator(&RateMatrix::new(r)?))
}

pub fn random_probabilities(n: usize, rng: &mut SimRng) -> Result<ProbabilityVector> {
    let w: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-6).collect();
    ProbabilityVector::normalized(&w)
}
