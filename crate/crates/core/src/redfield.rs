//! Exact Redfield generator: jump operator u in the global eigenbasis,
//! multi-channel dissipator, time propagation, and steady-state extraction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bath::{BathSpec, SpectralChannel};
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::operator::{dense_diagonalize, SparseOperator};
use crate::state::DensityMatrix;

/// Anything that maps a density matrix to its time derivative.
pub trait Generator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64>;
}

/// A dissipator channel ([u rho, v] + h.c.) with the product v·u cached.
#[derive(Debug, Clone)]
struct ChannelOps {
    u: SparseOperator,
    v: SparseOperator,
    vu: SparseOperator,
    u_dag: SparseOperator,
    v_dag: SparseOperator,
    vu_dag: SparseOperator,
}

/// The Redfield master equation
/// d rho/dt = -i[H_S, rho] + sum_j ([u_j rho, v_j] + h.c.).
#[derive(Debug, Clone)]
pub struct RedfieldGenerator {
    pub h_s: SparseOperator,
    channels: Vec<ChannelOps>,
}

impl RedfieldGenerator {
    pub fn new(h_s: SparseOperator, channels: Vec<(SparseOperator, SparseOperator)>) -> Result<Self> {
        let dim = h_s.dim();
        let mut ops = Vec::with_capacity(channels.len());
        for (u, v) in channels {
            if u.dim() != dim || v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: u.dim().max(v.dim()),
                });
            }
            let vu = v.matmul(&u)?;
            ops.push(ChannelOps {
                u_dag: u.adjoint(),
                v_dag: v.adjoint(),
                vu_dag: vu.adjoint(),
                u,
                v,
                vu,
            });
        }
        Ok(Self { h_s, channels: ops })
    }

    pub fn channel_pairs(&self) -> impl Iterator<Item = (&SparseOperator, &SparseOperator)> {
        self.channels.iter().map(|c| (&c.u, &c.v))
    }
}

impl Generator for RedfieldGenerator {
    fn dim(&self) -> usize {
        self.h_s.dim()
    }

    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let mut out = (self.h_s.mul_dense(rho) - self.h_s.dense_mul(rho)) * (-i);
        for ch in &self.channels {
            // [u rho, v] = (u rho) v - (v u) rho, plus the linear extension of
            // its Hermitian conjugate, v^dag rho u^dag - rho u^dag v^dag. The
            // two agree with taking the adjoint only for Hermitian rho; the
            // linear form keeps the superoperator linear over C.
            let urho = ch.u.mul_dense(rho);
            out += ch.v.dense_mul(&urho) - ch.vu.mul_dense(rho);
            let rho_udag = ch.u_dag.dense_mul(rho);
            out += ch.v_dag.mul_dense(&rho_udag) - ch.vu_dag.dense_mul(rho);
        }
        out
    }
}

/// The exact global jump operator u = sum_kq |k><k| v |q><q| W(E_k - E_q).
pub fn exact_u(
    h_s: &SparseOperator,
    v: &SparseOperator,
    bath: &BathSpec,
    channel: SpectralChannel,
) -> Result<SparseOperator> {
    let eig = dense_diagonalize(h_s)?;
    let vt = eig.vectors.adjoint() * v.to_dense() * &eig.vectors;
    let dim = h_s.dim();
    let mut weighted = vt;
    for k in 0..dim {
        for q in 0..dim {
            if weighted[(k, q)].norm() == 0.0 {
                continue;
            }
            weighted[(k, q)] *= bath.w(channel, eig.energies[k] - eig.energies[q])?;
        }
    }
    let u = &eig.vectors * weighted * eig.vectors.adjoint();
    Ok(SparseOperator::from_dense(h_s.lattice(), &u))
}

/// Propagate rho0 and return symmetrized snapshots at the requested times.
/// Trace drift beyond 1e-9 is logged, never corrected.
pub fn evolve<G: Generator>(
    gen: &G,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: OdeOptions,
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: gen.dim(),
        });
    }
    let f = |_t: f64, m: &DMatrix<Complex64>| gen.apply(m);
    let snaps = ode::integrate_with_snapshots(&f, 0.0, rho0.matrix.clone(), t_grid, opts)?;
    Ok(snaps
        .into_iter()
        .zip(t_grid)
        .map(|(m, &t)| {
            let mut rho = DensityMatrix::new(m);
            let drift = (rho.trace().re - 1.0).abs();
            if drift > 1e-9 {
                log::warn!("trace drift {drift:.3e} at t = {t}");
            }
            rho.symmetrize();
            rho
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateConfig {
    /// Converged when ||L[rho]||_F < residual_tol * ||rho||_F.
    pub residual_tol: f64,
    /// First propagation horizon; doubled until convergence.
    pub t_initial: f64,
    /// Give up beyond this total propagation time.
    pub max_horizon: f64,
    pub ode: OdeOptions,
}

impl Default for SteadyStateConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            t_initial: 1.0,
            max_horizon: 1e7,
            ode: OdeOptions {
                rtol: 1e-10,
                atol: 1e-12,
                ..Default::default()
            },
        }
    }
}

/// Steady state by propagation from the maximally mixed state with horizon
/// doubling.
pub fn steady_state<G: Generator>(gen: &G, cfg: SteadyStateConfig) -> Result<DensityMatrix> {
    let dim = gen.dim();
    let f = |_t: f64, m: &DMatrix<Complex64>| gen.apply(m);
    let mut rho = DensityMatrix::maximally_mixed(dim).matrix;
    let mut t = 0.0;
    let mut horizon = cfg.t_initial;
    loop {
        rho = ode::integrate_to(&f, t, rho, t + horizon, cfg.ode)?;
        t += horizon;
        let residual = gen.apply(&rho).norm();
        if residual < cfg.residual_tol * rho.norm() {
            let mut out = DensityMatrix::new(rho);
            out.symmetrize();
            return Ok(out);
        }
        if t >= cfg.max_horizon {
            return Err(Error::SteadyStateNonConvergence {
                residual,
                horizon: t,
            });
        }
        horizon *= 2.0;
    }
}

/// Cap for the explicit vectorized-Liouvillian method.
pub const NULLSPACE_DIM_CAP: usize = 64;

/// Build the dim^2 x dim^2 matrix of the vectorized generator, column by
/// column from basis matrices (column-major vec convention).
pub fn liouvillian_matrix<G: Generator>(gen: &G) -> Result<DMatrix<Complex64>> {
    let dim = gen.dim();
    if dim > NULLSPACE_DIM_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: NULLSPACE_DIM_CAP,
        });
    }
    let n2 = dim * dim;
    let mut sup = DMatrix::zeros(n2, n2);
    for col in 0..n2 {
        let mut basis = DMatrix::zeros(dim, dim);
        basis[(col % dim, col / dim)] = Complex64::new(1.0, 0.0);
        let image = gen.apply(&basis);
        for row in 0..n2 {
            sup[(row, col)] = image[(row % dim, row / dim)];
        }
    }
    Ok(sup)
}

/// Steady state by direct linear solve (dim <= 64): one row of the
/// vectorized Liouvillian is replaced by the trace-normalization constraint
/// and the system is LU-solved. Much faster than the SVD null-space route;
/// the result is verified against the generator residual. Uniqueness is NOT
/// checked here; use [`steady_state_nullspace`] when degeneracy matters.
pub fn steady_state_direct<G: Generator>(gen: &G) -> Result<DensityMatrix> {
    let dim = gen.dim();
    let mut sup = liouvillian_matrix(gen)?;
    let n2 = dim * dim;
    // Replace the last row (the equations are linearly dependent through
    // trace conservation) by Tr rho = 1.
    for col in 0..n2 {
        sup[(n2 - 1, col)] = if col % dim == col / dim {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    // faer's blocked, parallel LU; nalgebra's unblocked factorization is far
    // too slow at dim^2 = 4096.
    let sup_f = faer::Mat::from_fn(n2, n2, |r, c| sup[(r, c)]);
    let mut rhs = faer::Mat::<Complex64>::zeros(n2, 1);
    rhs[(n2 - 1, 0)] = Complex64::new(1.0, 0.0);
    use faer::prelude::Solve;
    let lu = sup_f.partial_piv_lu();
    let sol = lu.solve(&rhs);
    let mut rho = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        for row in 0..dim {
            rho[(row, col)] = sol[(col * dim + row, 0)];
        }
    }
    if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::DegenerateSteadyState);
    }
    let residual = gen.apply(&rho).norm();
    if !(residual < 1e-8 * rho.norm()) {
        return Err(Error::SteadyStateNonConvergence {
            residual,
            horizon: 0.0,
        });
    }
    let mut out = DensityMatrix::new(rho);
    out.symmetrize();
    Ok(out)
}

/// Steady state as the null vector of the vectorized Liouvillian (dim <= 64),
/// via SVD; errors if the null space is not one-dimensional.
pub fn steady_state_nullspace<G: Generator>(gen: &G) -> Result<DensityMatrix> {
    let dim = gen.dim();
    let sup = liouvillian_matrix(gen)?;
    let svd = sup.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });
    let smax = svd.singular_values[*order.last().unwrap()];
    if svd.singular_values[order[1]] < 1e-10 * smax.max(1e-300) {
        return Err(Error::DegenerateSteadyState);
    }
    let null: DVector<Complex64> = v_t.row(order[0]).adjoint();
    let mut rho = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        for row in 0..dim {
            rho[(row, col)] = null[col * dim + row];
        }
    }
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::DegenerateSteadyState);
    }
    rho /= tr;
    let mut out = DensityMatrix::new(rho);
    out.symmetrize();
    Ok(out)
}
