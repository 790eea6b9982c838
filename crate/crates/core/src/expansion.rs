//! Correlation-time expansions of the Redfield jump operator: the ad-hoc
//! expansion around one energy eps0 and the local expansion around the
//! local transition energies eps_kq, both built from nested commutators with
//! no global diagonalization.

use num_complex::Complex64;

use crate::bath::{BathSpec, SpectralChannel};
use crate::error::Result;
use crate::models::CouplingChannel;
use crate::operator::{shifted_adjoint_apply, SparseOperator};

/// Where the Taylor expansion of W is anchored.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpansionMode {
    /// One global expansion energy for the whole coupling operator.
    AdHoc { eps0: f64 },
    /// Per-piece expansion at the local transition energies eps_kq.
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPolicy {
    pub order: usize,
    pub mode: ExpansionMode,
}

impl ExpansionPolicy {
    pub fn local(order: usize) -> Self {
        Self {
            order,
            mode: ExpansionMode::Local,
        }
    }

    pub fn adhoc(order: usize, eps0: f64) -> Self {
        Self {
            order,
            mode: ExpansionMode::AdHoc { eps0 },
        }
    }
}

/// One Taylor expansion sum_{n=0}^{N} W^(n)(eps0)/n! ([H_S, .] - eps0)^n [x0]
/// together with the Frobenius norm of each order-n term.
fn taylor_u(
    h_s: &SparseOperator,
    x0: &SparseOperator,
    bath: &BathSpec,
    channel: SpectralChannel,
    eps0: f64,
    order: usize,
) -> Result<(SparseOperator, Vec<f64>)> {
    let derivs = bath.w_derivatives(channel, eps0, order)?;
    let mut sum = SparseOperator::zero(h_s.lattice());
    let mut norms = Vec::with_capacity(order + 1);
    let mut x = x0.clone();
    let mut inv_factorial = 1.0_f64;
    for (n, w_n) in derivs.iter().enumerate() {
        if n > 0 {
            inv_factorial /= n as f64;
            x = shifted_adjoint_apply(h_s, eps0, &x)?;
        }
        let term = x.scale(w_n * Complex64::new(inv_factorial, 0.0));
        norms.push(term.frobenius_norm());
        sum = sum.add(&term)?;
    }
    Ok((sum, norms))
}

/// Ad-hoc jump operator (one expansion energy for the whole channel).
pub fn adhoc_u(
    h_s: &SparseOperator,
    v: &SparseOperator,
    bath: &BathSpec,
    channel: SpectralChannel,
    eps0: f64,
    order: usize,
) -> Result<SparseOperator> {
    Ok(taylor_u(h_s, v, bath, channel, eps0, order)?.0)
}

/// Local jump operator: the ad-hoc iteration applied per decomposition piece
/// at its own local transition energy and summed.
pub fn local_u(h_s: &SparseOperator, channel: &CouplingChannel, order: usize) -> Result<SparseOperator> {
    let mut sum = SparseOperator::zero(h_s.lattice());
    for piece in &channel.pieces {
        let (part, _) = taylor_u(h_s, &piece.op, &channel.bath, channel.channel, piece.eps, order)?;
        sum = sum.add(&part)?;
    }
    Ok(sum)
}

/// Jump operator for the requested policy.
pub fn expanded_u(
    h_s: &SparseOperator,
    channel: &CouplingChannel,
    policy: &ExpansionPolicy,
) -> Result<SparseOperator> {
    match policy.mode {
        ExpansionMode::AdHoc { eps0 } => adhoc_u(
            h_s,
            &channel.u_source,
            &channel.bath,
            channel.channel,
            eps0,
            policy.order,
        ),
        ExpansionMode::Local => local_u(h_s, channel, policy.order),
    }
}

/// Frobenius norm of each order-n contribution to the local expansion,
/// summed over decomposition pieces. Emits a warning when the terms stop
/// decreasing beyond n = 1 (divergence indicator at low temperature).
pub fn expansion_term_norms(
    h_s: &SparseOperator,
    channel: &CouplingChannel,
    order: usize,
) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; order + 1];
    for piece in &channel.pieces {
        let (_, norms) = taylor_u(h_s, &piece.op, &channel.bath, channel.channel, piece.eps, order)?;
        for (t, n) in totals.iter_mut().zip(norms) {
            *t += n;
        }
    }
    for n in 2..totals.len() {
        if totals[n] > totals[n - 1] && totals[n] > 1e-14 {
            log::warn!(
                "expansion terms grow at order {n} ({:.3e} > {:.3e}); series may diverge",
                totals[n],
                totals[n - 1]
            );
            break;
        }
    }
    Ok(totals)
}

/// Smallest symmetric interval [-a, a] containing every transition energy
/// E_k - E_q whose coupling matrix element |<k|v|q>| reaches `threshold`,
/// plus the largest matrix element outside that interval. Dense diagnostic
/// for small systems.
pub fn coupling_matrix_element_screen(
    h_s: &SparseOperator,
    v: &SparseOperator,
    threshold: f64,
) -> Result<(f64, f64)> {
    let eig = crate::operator::dense_diagonalize(h_s)?;
    let vt = eig.vectors.adjoint() * v.to_dense() * &eig.vectors;
    let dim = h_s.dim();
    let mut half_width = 0.0_f64;
    for k in 0..dim {
        for q in 0..dim {
            if vt[(k, q)].norm() >= threshold {
                half_width = half_width.max((eig.energies[k] - eig.energies[q]).abs());
            }
        }
    }
    let mut max_outside = 0.0_f64;
    for k in 0..dim {
        for q in 0..dim {
            if (eig.energies[k] - eig.energies[q]).abs() > half_width {
                max_outside = max_outside.max(vt[(k, q)].norm());
            }
        }
    }
    Ok((half_width, max_outside))
}
