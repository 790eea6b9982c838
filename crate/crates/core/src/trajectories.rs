//! Monte-Carlo-wavefunction unraveling of a Lindblad generator: stochastic
//! pure-state trajectories whose ensemble average reproduces the master
//! equation, for system sizes beyond dense density-matrix propagation.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindblad::LindbladGenerator;
use crate::ode::{OdeOptions, Stepper};
use crate::operator::SparseOperator;
use crate::redfield::Generator;
use crate::state::StateVector;

#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub n_traj: usize,
    /// Master seed; trajectory k uses the independent ChaCha stream k.
    pub seed: u64,
    /// Ascending observable sampling times.
    pub t_grid: Vec<f64>,
    pub dt_max: f64,
    /// Tolerance for the norm bisection locating jump times.
    pub jump_tol: f64,
    /// Record (trajectory, time, channel) for every jump.
    pub record_jumps: bool,
    pub ode: OdeOptions,
}

impl TrajectoryConfig {
    pub fn new(n_traj: usize, seed: u64, t_grid: Vec<f64>) -> Self {
        Self {
            n_traj,
            seed,
            t_grid,
            dt_max: f64::INFINITY,
            jump_tol: 1e-8,
            record_jumps: true,
            ode: OdeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub trajectory: usize,
    pub time: f64,
    pub channel: usize,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub t_grid: Vec<f64>,
    /// means[obs][time] over trajectories.
    pub means: Vec<Vec<f64>>,
    /// Standard error = sample stddev / sqrt(n_traj).
    pub stderrs: Vec<Vec<f64>>,
    pub n_traj: usize,
    pub jump_log: Vec<JumpRecord>,
}

/// <psi|obs|psi> / <psi|psi> for Hermitian obs.
pub fn sample_observable(psi: &StateVector, obs: &SparseOperator) -> Result<f64> {
    if !obs.is_hermitian() {
        return Err(Error::NotHermitian {
            asym: obs.sub(&obs.adjoint())?.max_abs(),
        });
    }
    let n2 = psi.amplitudes.norm_squared();
    if n2 < 1e-300 {
        return Err(Error::NormCollapse);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); psi.dim()];
    obs.apply_vec(psi.amplitudes.as_slice(), &mut out);
    let mut val = Complex64::new(0.0, 0.0);
    for (a, o) in psi.amplitudes.iter().zip(&out) {
        val += a.conj() * o;
    }
    val /= n2;
    debug_assert!(val.im.abs() < 1e-10 * val.norm().max(1.0));
    Ok(val.re)
}

struct TrajectoryOutput {
    /// samples[obs][time]
    samples: Vec<Vec<f64>>,
    jumps: Vec<JumpRecord>,
}

fn run_single_trajectory(
    index: usize,
    gen: &LindbladGenerator,
    nh_rhs: &SparseOperator,
    jump_ops: &[&SparseOperator],
    psi0: &DVector<Complex64>,
    cfg: &TrajectoryConfig,
    observables: &[SparseOperator],
) -> Result<TrajectoryOutput> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let dim = psi0.len();
    let f = |_t: f64, y: &DVector<Complex64>| {
        let mut out = DVector::from_element(dim, Complex64::new(0.0, 0.0));
        nh_rhs.apply_vec(y.as_slice(), out.as_mut_slice());
        out
    };
    let ode = OdeOptions {
        dt_max: cfg.dt_max,
        ..cfg.ode
    };
    let mut stepper = Stepper::new(&f, 0.0, psi0.clone(), ode);
    let mut threshold = rng.gen::<f64>();
    let mut samples = vec![Vec::with_capacity(cfg.t_grid.len()); observables.len()];
    let mut jumps = Vec::new();

    for &t_target in &cfg.t_grid {
        loop {
            let t_prev = stepper.t;
            let y_prev = stepper.y.clone();
            let reached = stepper.step_towards(t_target)?;
            if stepper.y.norm_squared() <= threshold {
                // The squared norm decreases monotonically between jumps, so
                // [t_prev, stepper.t] brackets the crossing. Bisect by
                // re-integrating from the stored pre-step state.
                let (mut lo, mut hi) = (t_prev, stepper.t);
                let mut y_hit = stepper.y.clone();
                while hi - lo > cfg.jump_tol * hi.abs().max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    let y_mid = crate::ode::integrate_to(&f, t_prev, y_prev.clone(), mid, ode)?;
                    if y_mid.norm_squared() <= threshold {
                        hi = mid;
                        y_hit = y_mid;
                    } else {
                        lo = mid;
                    }
                }
                // Channel selection with probability ~ ||L_m psi||^2.
                let mut weights = Vec::with_capacity(jump_ops.len());
                let mut states = Vec::with_capacity(jump_ops.len());
                let mut total = 0.0;
                for l in jump_ops {
                    let mut out = DVector::from_element(dim, Complex64::new(0.0, 0.0));
                    l.apply_vec(y_hit.as_slice(), out.as_mut_slice());
                    total += out.norm_squared();
                    weights.push(total);
                    states.push(out);
                }
                if total < 1e-300 {
                    return Err(Error::NormCollapse);
                }
                let draw = rng.gen::<f64>() * total;
                let channel = weights.iter().position(|&w| draw < w).unwrap_or(jump_ops.len() - 1);
                let mut y_new = states.swap_remove(channel);
                y_new /= Complex64::new(y_new.norm(), 0.0);
                if cfg.record_jumps {
                    jumps.push(JumpRecord {
                        trajectory: index,
                        time: hi,
                        channel,
                    });
                }
                stepper = Stepper::new(&f, hi, y_new, ode);
                threshold = rng.gen::<f64>();
                continue;
            }
            if stepper.y.norm_squared() < 1e-12 {
                return Err(Error::NormCollapse);
            }
            if reached {
                break;
            }
        }
        let psi = StateVector::new(stepper.y.clone());
        for (slot, obs) in samples.iter_mut().zip(observables) {
            slot.push(sample_observable(&psi, obs)?);
        }
    }
    let _ = gen;
    Ok(TrajectoryOutput { samples, jumps })
}

/// Run the unraveling: n_traj independent trajectories in parallel, ensemble
/// mean and standard error per observable per grid time, and (optionally)
/// the merged jump log ordered by trajectory index.
pub fn mcwf_run(
    gen: &LindbladGenerator,
    psi0: &StateVector,
    cfg: &TrajectoryConfig,
    observables: &[SparseOperator],
) -> Result<EnsembleResult> {
    if cfg.n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
    }
    if cfg.t_grid.windows(2).any(|w| w[1] <= w[0]) || cfg.t_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "t_grid must be ascending and non-empty".into(),
        ));
    }
    if psi0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            left: psi0.dim(),
            right: gen.dim(),
        });
    }
    let mut psi = psi0.clone();
    psi.normalize();
    // Non-Hermitian evolution d psi/dt = -i H_nh psi with
    // H_nh = h_eff - (i/2) sum L^dag L, folded into one sparse operator.
    let ldl = gen.total_ldl()?;
    let nh_rhs = gen
        .h_eff
        .scale(Complex64::new(0.0, -1.0))
        .add(&ldl.scale(Complex64::new(-0.5, 0.0)))?;
    let jump_ops: Vec<&SparseOperator> = gen.jump_ops().collect();

    let outputs: Vec<Result<TrajectoryOutput>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|idx| {
            run_single_trajectory(idx, gen, &nh_rhs, &jump_ops, &psi.amplitudes, cfg, observables)
        })
        .collect();

    let n = cfg.n_traj as f64;
    let nt = cfg.t_grid.len();
    let mut sums = vec![vec![0.0; nt]; observables.len()];
    let mut sumsq = vec![vec![0.0; nt]; observables.len()];
    let mut jump_log = Vec::new();
    for out in outputs {
        let out = out?;
        for (o, series) in out.samples.iter().enumerate() {
            for (t, &x) in series.iter().enumerate() {
                sums[o][t] += x;
                sumsq[o][t] += x * x;
            }
        }
        jump_log.extend(out.jumps);
    }
    let mut means = vec![vec![0.0; nt]; observables.len()];
    let mut stderrs = vec![vec![0.0; nt]; observables.len()];
    for o in 0..observables.len() {
        for t in 0..nt {
            let mean = sums[o][t] / n;
            means[o][t] = mean;
            if cfg.n_traj > 1 {
                let var = ((sumsq[o][t] / n - mean * mean) * n / (n - 1.0)).max(0.0);
                stderrs[o][t] = (var / n).sqrt();
            }
        }
    }
    Ok(EnsembleResult {
        t_grid: cfg.t_grid.clone(),
        means,
        stderrs,
        n_traj: cfg.n_traj,
        jump_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathSpec;
    use crate::expansion::ExpansionPolicy;
    use crate::lindblad::local_lindblad_generator;
    use crate::models::{build_xxz, pauli, CouplingChannel, XxzSpec};
    use crate::operator::{dense_diagonalize, embed_site_operator, LatticeSpec};
    use crate::state::{build_initial_state, InitialState};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sample_observable_basics() {
        let lat = LatticeSpec::spin_chain(2).unwrap();
        let psi = build_initial_state(&lat, &InitialState::AllUp).unwrap();
        let ident = SparseOperator::identity(&lat);
        assert!((sample_observable(&psi, &ident).unwrap() - 1.0).abs() < 1e-14);
        for site in 0..2 {
            let sz = embed_site_operator(&lat, site, &pauli::sz()).unwrap();
            assert!((sample_observable(&psi, &sz).unwrap() - 1.0).abs() < 1e-14);
        }
        let xpol = build_initial_state(&lat, &InitialState::XPolarized).unwrap();
        let sz0 = embed_site_operator(&lat, 0, &pauli::sz()).unwrap();
        assert!(sample_observable(&xpol, &sz0).unwrap().abs() < 1e-14);
        let sp = embed_site_operator(&lat, 0, &pauli::sp()).unwrap();
        assert!(sample_observable(&psi, &sp).is_err());
    }

    #[test]
    fn closed_system_matches_unitary_evolution() {
        // No jump operators: every trajectory is plain Schroedinger
        // evolution, compared against exact eigenbasis propagation.
        let spec = XxzSpec::benchmark(3, 1.0);
        let lat = LatticeSpec::spin_chain(3).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        let gen = crate::lindblad::LindbladGenerator::new(h.clone(), vec![]).unwrap();
        let psi0 = build_initial_state(&lat, &InitialState::XPolarized).unwrap();
        let sz0 = embed_site_operator(&lat, 0, &pauli::sz()).unwrap();
        let times = vec![0.5, 1.5, 3.0, 6.0];
        let cfg = TrajectoryConfig::new(1, 42, times.clone());
        let res = mcwf_run(&gen, &psi0, &cfg, &[sz0.clone()]).unwrap();
        assert!(res.jump_log.is_empty());

        let eig = dense_diagonalize(&h).unwrap();
        let coeffs = eig.vectors.adjoint() * &psi0.amplitudes;
        for (k, &t) in times.iter().enumerate() {
            let phased = DVector::from_fn(8, |i, _| {
                coeffs[i] * Complex64::new(0.0, -eig.energies[i] * t).exp()
            });
            let psi_t = StateVector::new(&eig.vectors * phased);
            let exact = sample_observable(&psi_t, &sz0).unwrap();
            assert!(
                (res.means[0][k] - exact).abs() < 1e-6,
                "t = {t}: {} vs {exact}",
                res.means[0][k]
            );
        }
    }

    #[test]
    fn two_level_decay_matches_exponential() {
        let lat = LatticeSpec::spin_chain(1).unwrap();
        let gamma: f64 = 0.7;
        let l = embed_site_operator(&lat, 0, &pauli::sm())
            .unwrap()
            .scale(c(gamma.sqrt(), 0.0));
        let gen =
            crate::lindblad::LindbladGenerator::new(SparseOperator::zero(&lat), vec![l]).unwrap();
        let psi0 = build_initial_state(&lat, &InitialState::AllUp).unwrap();
        // Excited population = (1 + <sz>)/2.
        let sz = embed_site_operator(&lat, 0, &pauli::sz()).unwrap();
        let times = vec![0.2, 0.6, 1.2, 2.0, 3.5];
        let cfg = TrajectoryConfig::new(10_000, 7, times.clone());
        let res = mcwf_run(&gen, &psi0, &cfg, &[sz]).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let pop = 0.5 * (1.0 + res.means[0][k]);
            let err = 0.5 * res.stderrs[0][k];
            let exact = (-gamma * t).exp();
            assert!(
                (pop - exact).abs() <= 3.0 * err.max(1e-12),
                "t = {t}: pop {pop} vs {exact}, stderr {err}"
            );
        }
        assert!(!res.jump_log.is_empty());
    }

    fn small_local_lindblad() -> (crate::lindblad::LindbladGenerator, LatticeSpec) {
        let spec = XxzSpec::benchmark(3, 1.0);
        let lat = LatticeSpec::spin_chain(3).unwrap();
        let h = build_xxz(&spec, &lat).unwrap();
        let channels: Vec<CouplingChannel> = [0usize, 2]
            .iter()
            .map(|&s| {
                let bath = BathSpec::ohmic(0.25, 2.2).unwrap();
                CouplingChannel::xxz_boundary(&lat, &spec, s, bath).unwrap()
            })
            .collect();
        let gen = local_lindblad_generator(&h, &channels, &ExpansionPolicy::local(1)).unwrap();
        (gen, lat)
    }

    #[test]
    fn ensemble_matches_master_equation() {
        let (gen, lat) = small_local_lindblad();
        let psi0 = build_initial_state(&lat, &InitialState::AllUp).unwrap();
        let obs: Vec<SparseOperator> = (0..3)
            .map(|s| embed_site_operator(&lat, s, &pauli::sz()).unwrap())
            .collect();
        let times = vec![0.5, 2.0, 5.0];
        let cfg = TrajectoryConfig::new(600, 11, times.clone());
        let res = mcwf_run(&gen, &psi0, &cfg, &obs).unwrap();
        let dense = crate::redfield::evolve(
            &gen,
            &psi0.projector(),
            &times,
            crate::ode::OdeOptions::default(),
        )
        .unwrap();
        for (o, op) in obs.iter().enumerate() {
            for k in 0..times.len() {
                let exact = dense[k].expectation(op).re;
                let dev = (res.means[o][k] - exact).abs();
                assert!(
                    dev <= 3.0 * res.stderrs[o][k].max(1e-12),
                    "obs {o} t {}: dev {dev}, stderr {}",
                    times[k],
                    res.stderrs[o][k]
                );
            }
        }
    }

    #[test]
    fn reproducible_jump_logs() {
        let (gen, lat) = small_local_lindblad();
        let psi0 = build_initial_state(&lat, &InitialState::AllUp).unwrap();
        let sz = embed_site_operator(&lat, 0, &pauli::sz()).unwrap();
        let cfg = TrajectoryConfig::new(40, 123, vec![1.0, 4.0]);
        let a = mcwf_run(&gen, &psi0, &cfg, &[sz.clone()]).unwrap();
        let b = mcwf_run(&gen, &psi0, &cfg, &[sz]).unwrap();
        assert_eq!(a.jump_log, b.jump_log);
        assert!(!a.jump_log.is_empty());
        assert_eq!(a.means, b.means);
        // Logs arrive ordered by trajectory index regardless of scheduling.
        let order: Vec<usize> = a.jump_log.iter().map(|j| j.trajectory).collect();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(order, sorted);
    }

    #[test]
    fn rejects_bad_configs() {
        let (gen, lat) = small_local_lindblad();
        let psi0 = build_initial_state(&lat, &InitialState::AllUp).unwrap();
        let sz = embed_site_operator(&lat, 0, &pauli::sz()).unwrap();
        let empty = TrajectoryConfig::new(0, 1, vec![1.0]);
        assert!(mcwf_run(&gen, &psi0, &empty, &[sz.clone()]).is_err());
        let descending = TrajectoryConfig::new(1, 1, vec![2.0, 1.0]);
        assert!(mcwf_run(&gen, &psi0, &descending, &[sz]).is_err());
    }
}
