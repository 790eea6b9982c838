//! Pseudo-Lindblad decomposition of Redfield-type generators, the truncation
//! that yields the local Lindblad equation, and the traditional local
//! Lindblad baseline.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::{BathSpec, SpectralChannel};
use crate::error::{Error, Result};
use crate::expansion::{expanded_u, ExpansionPolicy};
use crate::models::{CouplingChannel, XxzSpec};
use crate::operator::{embed_site_operator, LatticeSpec, SparseOperator};
use crate::redfield::Generator;

/// Exact rewriting of one Redfield channel ([u rho, v] + h.c.) as
/// -i[h_shift, rho] + D_{L+} - D_{L-}.
#[derive(Debug, Clone)]
pub struct PseudoLindbladForm {
    /// Effective Hamiltonian h_s - (i/2)(v u - u^dag v).
    pub h_eff: SparseOperator,
    pub l_plus: SparseOperator,
    pub l_minus: SparseOperator,
    /// The free parameter: real lambda, or eta^2 in the complex case.
    pub lambda: Complex64,
}

/// Lamb-shift part of the effective Hamiltonian for one channel with
/// Hermitian v: -(i/2)(v u - u^dag v).
fn lamb_shift(u: &SparseOperator, v: &SparseOperator) -> Result<SparseOperator> {
    let vu = v.matmul(u)?;
    vu.sub(&vu.adjoint())
        .map(|m| m.scale(Complex64::new(0.0, -0.5)))
}

fn require_hermitian(v: &SparseOperator) -> Result<()> {
    let asym = v.sub(&v.adjoint())?.max_abs();
    if asym > 1e-12 * v.max_abs().max(1e-300) {
        return Err(Error::NotHermitian { asym });
    }
    Ok(())
}

/// Decompose one Redfield channel into pseudo-Lindblad form. `lambda` must be
/// real and positive; the jump operators are L+- = (u +- lambda v)/sqrt(2 lambda)
/// and the identity
///   [u rho, v] + h.c. = -i[dh, rho] + D_{L+}[rho] - D_{L-}[rho]
/// holds exactly for every admissible lambda. Requires Hermitian v.
pub fn pseudo_lindblad_decompose(
    h_s: &SparseOperator,
    u: &SparseOperator,
    v: &SparseOperator,
    lambda: f64,
) -> Result<PseudoLindbladForm> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pseudo-Lindblad lambda must be positive, got {lambda}"
        )));
    }
    require_hermitian(v)?;
    let h_eff = h_s.add(&lamb_shift(u, v)?)?;
    let s = Complex64::new(1.0 / (2.0 * lambda).sqrt(), 0.0);
    let lv = v.scale(Complex64::new(lambda, 0.0));
    let l_plus = u.add(&lv)?.scale(s);
    let l_minus = u.sub(&lv)?.scale(s);
    Ok(PseudoLindbladForm {
        h_eff,
        l_plus,
        l_minus,
        lambda: Complex64::new(lambda, 0.0),
    })
}

/// Complex-parameter variant for baths with complex W: with w = W(eps0),
/// L+ = (u + w* v) / (sqrt|w| sqrt(1 + w*/w)) and L- analogous with the minus
/// sign. Reduces to the real decomposition with lambda = w when w is real
/// and positive. The square root takes the principal branch.
pub fn pseudo_lindblad_decompose_complex(
    h_s: &SparseOperator,
    u: &SparseOperator,
    v: &SparseOperator,
    w: Complex64,
) -> Result<PseudoLindbladForm> {
    if w.norm() == 0.0 {
        return Err(Error::InvalidParameter(
            "pseudo-Lindblad weight W(eps0) vanishes".into(),
        ));
    }
    require_hermitian(v)?;
    let h_eff = h_s.add(&lamb_shift(u, v)?)?;
    let denom = Complex64::new(w.norm().sqrt(), 0.0) * (Complex64::new(1.0, 0.0) + w.conj() / w).sqrt();
    if denom.norm() < 1e-300 {
        return Err(Error::InvalidParameter(
            "pseudo-Lindblad normalization vanishes (W purely imaginary)".into(),
        ));
    }
    let s = Complex64::new(1.0, 0.0) / denom;
    let wv = v.scale(w.conj());
    let l_plus = u.add(&wv)?.scale(s);
    let l_minus = u.sub(&wv)?.scale(s);
    Ok(PseudoLindbladForm {
        h_eff,
        l_plus,
        l_minus,
        lambda: w,
    })
}

/// Thermally weighted average of the per-transition optimal lambda:
/// lambda_loc = sqrt( sum_kq W(eps_kq)^2 r_kq^2 / sum_kq r_kq^2 ),
/// r_kq = |<k|v|q>| e^{-E_q^loc / T}. For complex W the same formula is
/// evaluated with the principal square root (pseudo-norm average); it
/// coincides with the real formula when W is real.
pub fn lambda_local(channel: &CouplingChannel) -> Result<Complex64> {
    let temp = channel.bath.temperature;
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0_f64;
    // Shift local energies so the Boltzmann weights stay finite at low T.
    let e_min = channel
        .local_energies
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    for piece in &channel.pieces {
        let w = channel.bath.w(channel.channel, piece.eps)?;
        for (matelem, e_q) in &piece.weights {
            let r = matelem.norm() * (-(e_q - e_min) / temp).exp();
            num += w * w * r * r;
            den += r * r;
        }
    }
    if den < 1e-300 {
        return Err(Error::TrivialCoupling);
    }
    Ok((num / den).sqrt())
}

/// Completely positive generator: d rho/dt = -i[h_eff, rho] + sum_L D_L[rho].
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    pub h_eff: SparseOperator,
    jumps: Vec<JumpOps>,
}

#[derive(Debug, Clone)]
struct JumpOps {
    l: SparseOperator,
    l_dag: SparseOperator,
    ldl: SparseOperator,
}

impl LindbladGenerator {
    pub fn new(h_eff: SparseOperator, jump_ops: Vec<SparseOperator>) -> Result<Self> {
        let dim = h_eff.dim();
        let mut jumps = Vec::with_capacity(jump_ops.len());
        for l in jump_ops {
            if l.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: l.dim(),
                });
            }
            let l_dag = l.adjoint();
            let ldl = l_dag.matmul(&l)?;
            jumps.push(JumpOps { l, l_dag, ldl });
        }
        Ok(Self { h_eff, jumps })
    }

    pub fn jump_ops(&self) -> impl Iterator<Item = &SparseOperator> {
        self.jumps.iter().map(|j| &j.l)
    }

    /// Sum of L^dag L over all jump channels (for non-Hermitian evolution).
    pub fn total_ldl(&self) -> Result<SparseOperator> {
        let mut acc = SparseOperator::zero(self.h_eff.lattice());
        for j in &self.jumps {
            acc = acc.add(&j.ldl)?;
        }
        Ok(acc)
    }
}

impl Generator for LindbladGenerator {
    fn dim(&self) -> usize {
        self.h_eff.dim()
    }

    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let mut out = (self.h_eff.mul_dense(rho) - self.h_eff.dense_mul(rho)) * (-i);
        let half = Complex64::new(0.5, 0.0);
        for j in &self.jumps {
            let lrho = j.l.mul_dense(rho);
            out += j.l_dag.dense_mul(&lrho);
            let anti = j.ldl.mul_dense(rho) + j.ldl.dense_mul(rho);
            out -= anti * half;
        }
        out
    }
}

/// The local Lindblad equation: per channel, the order-N expanded jump
/// operator u_loc, the thermally averaged lambda_loc, and the single positive
/// jump operator L+ = (u_loc + lambda v)/sqrt(2 lambda); L- is discarded and
/// its Frobenius norm logged as a truncation diagnostic.
pub fn local_lindblad_generator(
    h_s: &SparseOperator,
    channels: &[CouplingChannel],
    policy: &ExpansionPolicy,
) -> Result<LindbladGenerator> {
    let mut h_eff = h_s.clone();
    let mut jump_ops = Vec::with_capacity(channels.len());
    for (idx, ch) in channels.iter().enumerate() {
        let u = expanded_u(h_s, ch, policy)?;
        let lam = lambda_local(ch)?;
        if lam.im.abs() > 1e-12 * lam.norm() {
            return Err(Error::Unsupported(format!(
                "local Lindblad requires a real lambda_loc; channel {idx} gives {lam}"
            )));
        }
        let form = pseudo_lindblad_decompose(h_s, &u, &ch.v, lam.re)?;
        let discarded = form.l_minus.frobenius_norm();
        log::info!("channel {idx}: lambda_loc = {:.6e}, ||L-||_F = {discarded:.3e}", lam.re);
        h_eff = h_eff.add(&form.h_eff.sub(h_s)?)?;
        jump_ops.push(form.l_plus);
    }
    LindbladGenerator::new(h_eff, jump_ops)
}

/// The traditional local Lindblad baseline for the boundary-driven XXZ chain:
/// H_eff = H_S (W is real, no Lamb shift), jump operators
/// sqrt(gamma_i^+-) sigma^+-_i at the boundary sites with
/// gamma_i^+- = 2 W(+-2 h_i) at the respective bath temperature. Ohmic only.
pub fn standard_local_lindblad_generator(
    h_s: &SparseOperator,
    spec: &XxzSpec,
    lattice: &LatticeSpec,
    bath_left: &BathSpec,
    bath_right: &BathSpec,
) -> Result<LindbladGenerator> {
    let l = spec.l;
    let mut jump_ops = Vec::with_capacity(4);
    for (site, bath) in [(0usize, bath_left), (l - 1, bath_right)] {
        if bath.family != crate::bath::BathFamily::PureOhmic {
            return Err(Error::WrongBathFamily {
                expected: "pure-ohmic",
                got: bath.family.name(),
            });
        }
        let h_i = spec.field_at(site);
        let g_minus = 2.0 * bath.w(SpectralChannel::Standard, -2.0 * h_i)?.re;
        let g_plus = 2.0 * bath.w(SpectralChannel::Standard, 2.0 * h_i)?.re;
        let sm = embed_site_operator(lattice, site, &crate::models::pauli::sm())?;
        let sp = embed_site_operator(lattice, site, &crate::models::pauli::sp())?;
        jump_ops.push(sm.scale(Complex64::new(g_minus.sqrt(), 0.0)));
        jump_ops.push(sp.scale(Complex64::new(g_plus.sqrt(), 0.0)));
    }
    LindbladGenerator::new(h_s.clone(), jump_ops)
}
