//! Observables and distances: trace-norm distance, Gibbs states,
//! magnetization currents, eigenbasis populations, time-averaged error.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{dense_diagonalize, embed_site_operator, SparseOperator};
use crate::state::DensityMatrix;

/// Trace norm ||A||_1 = Tr sqrt(A^dag A) = sum of singular values.
pub fn trace_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// d(rho, sigma) = ||rho - sigma||_1 (no factor 1/2: orthogonal pure states
/// are at distance 2).
pub fn trace_norm_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(trace_norm(&(&a.matrix - &b.matrix)))
}

/// Gibbs state e^{-H/T} / Z. Energies are shifted by the ground state before
/// exponentiating so low temperatures do not underflow the partition sum.
pub fn gibbs_state(h: &SparseOperator, temperature: f64) -> Result<DensityMatrix> {
    if temperature <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Gibbs state needs temperature > 0, got {temperature}"
        )));
    }
    let eig = dense_diagonalize(h)?;
    let e0 = eig
        .energies
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eig
        .energies
        .iter()
        .map(|&e| (-(e - e0) / temperature).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let dim = h.dim();
    let mut rho = DMatrix::zeros(dim, dim);
    for (k, &w) in weights.iter().enumerate() {
        let col = eig.vectors.column(k);
        let p = Complex64::new(w / z, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                rho[(r, c)] += col[r] * col[c].conj() * p;
            }
        }
    }
    Ok(DensityMatrix::new(rho))
}

/// Magnetization current across bond (i, i+1) of a spin chain:
/// j_i = -i Tr(rho [H_{i,i+1}, sz_i]), where H_{i,i+1} is the bond term.
/// The commutator is formed numerically from the given bond operator, so the
/// same routine serves any bond Hamiltonian.
pub fn magnetization_current(
    rho: &DensityMatrix,
    bond_term: &SparseOperator,
    site: usize,
) -> Result<f64> {
    let lat = bond_term.lattice();
    let sz = embed_site_operator(lat, site, &crate::models::pauli::sz())?;
    let comm = crate::operator::commutator(bond_term, &sz)?;
    let val = rho.expectation(&comm) * Complex64::new(0.0, -1.0);
    Ok(val.re)
}

/// Populations |<k|rho|k>| and the total coherence weight of rho in the
/// eigenbasis of h. Returns (populations ascending in energy, Frobenius norm
/// of the off-diagonal part).
pub fn eigenbasis_populations_coherences(
    rho: &DensityMatrix,
    h: &SparseOperator,
) -> Result<(Vec<f64>, f64)> {
    let eig = dense_diagonalize(h)?;
    let rot = eig.vectors.adjoint() * &rho.matrix * &eig.vectors;
    let dim = rho.dim();
    let pops: Vec<f64> = (0..dim).map(|k| rot[(k, k)].re).collect();
    let mut coh2 = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            if r != c {
                coh2 += rot[(r, c)].norm_sqr();
            }
        }
    }
    Ok((pops, coh2.sqrt()))
}

/// Time-averaged trace-norm distance between two snapshot sequences taken on
/// the same uniform grid (simple mean over the grid).
pub fn time_averaged_distance(a: &[DensityMatrix], b: &[DensityMatrix]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "snapshot sequences have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += trace_norm_distance(x, y)?;
    }
    Ok(acc / a.len() as f64)
}

/// Uniform grid of n points over [0, horizon], endpoints included.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| horizon * k as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_xxz, pauli, xxz_bond_term, XxzSpec};
    use crate::operator::LatticeSpec;
    use nalgebra::DVector;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pure(dim: usize, idx: usize) -> DensityMatrix {
        let mut v = DVector::from_element(dim, c(0.0, 0.0));
        v[idx] = c(1.0, 0.0);
        crate::state::StateVector::new(v).projector()
    }

    #[test]
    fn orthogonal_pure_states_at_distance_two() {
        let a = pure(2, 0);
        let b = pure(2, 1);
        assert!((trace_norm_distance(&a, &b).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_qubit_distance() {
        // diag(p, 1-p) vs diag(q, 1-q): distance 2|p - q|.
        let (p, q) = (0.3, 0.55);
        let a = DensityMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(p, 0.0),
            c(1.0 - p, 0.0),
        ])));
        let b = DensityMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(q, 0.0),
            c(1.0 - q, 0.0),
        ])));
        let d = trace_norm_distance(&a, &b).unwrap();
        assert!((d - 2.0 * (p - q).abs()).abs() < 1e-14);
    }

    #[test]
    fn metric_axioms_hold() {
        let a = pure(2, 0);
        let b = pure(2, 1);
        let m = DensityMatrix::maximally_mixed(2);
        assert!(trace_norm_distance(&a, &a).unwrap() < 1e-15);
        let dab = trace_norm_distance(&a, &b).unwrap();
        assert!((dab - trace_norm_distance(&b, &a).unwrap()).abs() < 1e-15);
        let dam = trace_norm_distance(&a, &m).unwrap();
        let dmb = trace_norm_distance(&m, &b).unwrap();
        assert!(dab <= dam + dmb + 1e-14);
    }

    #[test]
    fn gibbs_single_spin_boltzmann_ratio() {
        let lat = LatticeSpec::spin_chain(1).unwrap();
        let h1 = 1.0;
        let temp = 2.2;
        let h = embed_site_operator(&lat, 0, &(pauli::sz() * c(h1, 0.0))).unwrap();
        let g = gibbs_state(&h, temp).unwrap();
        assert!((g.trace().re - 1.0).abs() < 1e-14);
        let ratio = g.matrix[(1, 1)].re / g.matrix[(0, 0)].re;
        assert!((ratio - (2.0 * h1 / temp).exp()).abs() < 1e-12);
    }

    #[test]
    fn gibbs_infinite_temperature_limit() {
        let spec = XxzSpec::benchmark(2, 1.0);
        let lat = LatticeSpec::spin_chain(2).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        let g = gibbs_state(&h, 1e8).unwrap();
        let m = DensityMatrix::maximally_mixed(4);
        assert!(trace_norm_distance(&g, &m).unwrap() < 1e-6);
    }

    #[test]
    fn gibbs_low_temperature_is_ground_state() {
        let lat = LatticeSpec::spin_chain(1).unwrap();
        let h = embed_site_operator(&lat, 0, &(pauli::sz() * c(1.0, 0.0))).unwrap();
        // Ground state of +sz is |down>; shift-by-e0 keeps this finite.
        let g = gibbs_state(&h, 1e-6).unwrap();
        assert!((g.matrix[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn current_vanishes_in_gibbs_state() {
        let spec = XxzSpec::benchmark(3, 1.0);
        let lat = LatticeSpec::spin_chain(3).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        let g = gibbs_state(&h, 2.2).unwrap();
        for bond in 0..2 {
            let term = xxz_bond_term(&spec, &lat, bond).unwrap();
            let j = magnetization_current(&g, &term, bond).unwrap();
            assert!(j.abs() < 1e-10, "Gibbs current {j} at bond {bond}");
        }
    }

    #[test]
    fn current_matches_hand_formula() {
        // For the XXZ bond term -J(sx sx + sy sy + D sz sz) in Pauli
        // operators, j_i = -i Tr(rho [H_bond, sz_i]) = 8 J Im <s^+_i s^-_{i+1}>.
        let spec = XxzSpec::benchmark(2, 0.7);
        let lat = LatticeSpec::spin_chain(2).unwrap();
        let term = xxz_bond_term(&spec, &lat, 0).unwrap();
        let mut m = DMatrix::from_element(4, 4, c(0.25, 0.0));
        m[(1, 2)] = c(0.1, 0.07);
        m[(2, 1)] = c(0.1, -0.07);
        let rho = DensityMatrix::new(m);
        let sp0 = embed_site_operator(&lat, 0, &pauli::sp()).unwrap();
        let sm1 = embed_site_operator(&lat, 1, &pauli::sm()).unwrap();
        let flip = sp0.matmul(&sm1).unwrap();
        let expect = 8.0 * spec.j * rho.expectation(&flip).im;
        let j = magnetization_current(&rho, &term, 0).unwrap();
        assert!((j - expect).abs() < 1e-13, "{j} vs {expect}");
    }

    #[test]
    fn populations_and_coherences_of_eigenstate() {
        let spec = XxzSpec::benchmark(2, 1.0);
        let lat = LatticeSpec::spin_chain(2).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        let eig = crate::operator::dense_diagonalize(&h).unwrap();
        let psi = crate::state::StateVector::new(eig.vectors.column(2).into_owned());
        let rho = psi.projector();
        let (pops, coh) = eigenbasis_populations_coherences(&rho, &h).unwrap();
        assert!((pops[2] - 1.0).abs() < 1e-12);
        assert!(pops.iter().enumerate().all(|(k, &p)| k == 2 || p.abs() < 1e-12));
        assert!(coh < 1e-12);
    }

    #[test]
    fn time_average_of_constant_sequences() {
        let a = vec![pure(2, 0), pure(2, 0)];
        let b = vec![pure(2, 1), pure(2, 1)];
        assert!((time_averaged_distance(&a, &b).unwrap() - 2.0).abs() < 1e-13);
        assert!(time_averaged_distance(&a, &[]).is_err());
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(4.0, 200);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert!((g[199] - 4.0).abs() < 1e-15);
        let step = g[1] - g[0];
        for w in g.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
    }
}
