//! Density matrices and pure state vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::LatticeSpec;

/// Dense Hermitian unit-trace matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Maximally mixed state I/dim.
    pub fn maximally_mixed(dim: usize) -> Self {
        let v = Complex64::new(1.0 / dim as f64, 0.0);
        Self::new(DMatrix::from_diagonal_element(dim, dim, v))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diagonal().sum()
    }

    /// rho <- (rho + rho^dag)/2; roundoff-level asymmetry accumulates during
    /// Redfield propagation.
    pub fn symmetrize(&mut self) {
        let adj = self.matrix.adjoint();
        self.matrix = (&self.matrix + adj) * Complex64::new(0.5, 0.0);
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    pub fn expectation(&self, op: &crate::operator::SparseOperator) -> Complex64 {
        // Tr(rho O) = sum_{rc} O_{rc} rho_{cr}
        let mut s = Complex64::new(0.0, 0.0);
        for (r, c, v) in op.iter_entries() {
            s += v * self.matrix[(c, r)];
        }
        s
    }

    /// Eigenvalues of the (symmetrized) matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let adj = self.matrix.adjoint();
        let herm = (&self.matrix + adj) * Complex64::new(0.5, 0.0);
        let mut e: Vec<f64> = herm.symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).diagonal().sum().re
    }
}

/// Normalized complex vector for trajectory propagation.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes /= Complex64::new(n, 0.0);
        }
    }

    /// Projector |psi><psi| as a density matrix.
    pub fn projector(&self) -> DensityMatrix {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = self.amplitudes[r] * self.amplitudes[c].conj();
            }
        }
        DensityMatrix::new(m)
    }
}

/// Initial-state families used in the benchmark experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// [(|up> + |down>)/sqrt(2)]^(x L)
    XPolarized,
    /// |up, ..., up>
    AllUp,
    /// Product Fock state with the given per-site occupations.
    Fock(Vec<usize>),
}

pub fn build_initial_state(lattice: &LatticeSpec, kind: &InitialState) -> Result<StateVector> {
    let dim = lattice.total_dim();
    let l = lattice.num_sites();
    match kind {
        InitialState::XPolarized => {
            for site in 0..l {
                if lattice.local_dim(site) != 2 {
                    return Err(Error::InvalidParameter(
                        "x-polarized initial state requires spin-1/2 sites".into(),
                    ));
                }
            }
            let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
            Ok(StateVector::new(DVector::from_element(dim, amp)))
        }
        InitialState::AllUp => {
            for site in 0..l {
                if lattice.local_dim(site) != 2 {
                    return Err(Error::InvalidParameter(
                        "all-up initial state requires spin-1/2 sites".into(),
                    ));
                }
            }
            // Up is the first basis state on every site: global index 0.
            let mut v = DVector::from_element(dim, Complex64::new(0.0, 0.0));
            v[0] = Complex64::new(1.0, 0.0);
            Ok(StateVector::new(v))
        }
        InitialState::Fock(occ) => {
            if occ.len() != l {
                return Err(Error::InvalidParameter(format!(
                    "occupation list has {} entries for {} sites",
                    occ.len(),
                    l
                )));
            }
            let mut idx = 0usize;
            for (site, &n) in occ.iter().enumerate() {
                let d = lattice.local_dim(site);
                if n >= d {
                    return Err(Error::InvalidParameter(format!(
                        "occupation {n} at site {site} exceeds cutoff {}",
                        d - 1
                    )));
                }
                idx = idx * d + n;
            }
            let mut v = DVector::from_element(dim, Complex64::new(0.0, 0.0));
            v[idx] = Complex64::new(1.0, 0.0);
            Ok(StateVector::new(v))
        }
    }
}
