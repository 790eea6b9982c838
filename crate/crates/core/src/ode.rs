//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)) for
//! complex matrix- and vector-valued ODEs.
//!
//! Snapshots at requested times are produced by clamping the step size to
//! land exactly on them, trading a little step efficiency for not having
//! to carry a dense-output interpolant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dormand-Prince coefficients. `A` is the strictly lower-triangular stage
/// matrix, `B5` the fifth-order weights (also stage 7: FSAL), `E` = B5 - B4
/// the embedded error weights.
const STAGES: usize = 7;
const C: [f64; STAGES] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; STAGES] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const E: [f64; STAGES] = [
    71.0 / 57_600.0,
    0.0,
    -71.0 / 16_695.0,
    71.0 / 1_920.0,
    -17_253.0 / 339_200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub dt_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            dt_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

/// Minimal state interface the stepper needs; implemented for complex
/// dynamic matrices and vectors.
pub trait OdeState: Clone {
    /// self + h * sum_i c_i k_i
    fn combine(&self, h: f64, terms: &[(f64, &Self)]) -> Self;
    /// h * sum_i c_i k_i with self contributing only its shape.
    fn weighted_sum(&self, h: f64, terms: &[(f64, &Self)]) -> Self;
    /// Scaled RMS error norm of `err` against tolerances built from two
    /// solution candidates.
    fn error_norm(err: &Self, a: &Self, b: &Self, atol: f64, rtol: f64) -> f64;
}

fn combine_slices(base: Option<&[Complex64]>, len: usize, h: f64, terms: &[(f64, &[Complex64])]) -> Vec<Complex64> {
    let mut out = match base {
        Some(b) => b.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); len],
    };
    for &(c, k) in terms {
        let hc = h * c;
        if hc == 0.0 {
            continue;
        }
        for (o, &kv) in out.iter_mut().zip(k) {
            *o += hc * kv;
        }
    }
    out
}

fn error_norm_slices(err: &[Complex64], a: &[Complex64], b: &[Complex64], atol: f64, rtol: f64) -> f64 {
    let mut acc = 0.0;
    for ((&e, &x), &y) in err.iter().zip(a).zip(b) {
        let scale = atol + rtol * x.norm().max(y.norm());
        let r = e.norm() / scale;
        acc += r * r;
    }
    (acc / err.len() as f64).sqrt()
}

impl OdeState for DMatrix<Complex64> {
    fn combine(&self, h: f64, terms: &[(f64, &Self)]) -> Self {
        let slices: Vec<(f64, &[Complex64])> =
            terms.iter().map(|&(c, k)| (c, k.as_slice())).collect();
        DMatrix::from_vec(
            self.nrows(),
            self.ncols(),
            combine_slices(Some(self.as_slice()), self.len(), h, &slices),
        )
    }

    fn weighted_sum(&self, h: f64, terms: &[(f64, &Self)]) -> Self {
        let slices: Vec<(f64, &[Complex64])> =
            terms.iter().map(|&(c, k)| (c, k.as_slice())).collect();
        DMatrix::from_vec(
            self.nrows(),
            self.ncols(),
            combine_slices(None, self.len(), h, &slices),
        )
    }

    fn error_norm(err: &Self, a: &Self, b: &Self, atol: f64, rtol: f64) -> f64 {
        error_norm_slices(err.as_slice(), a.as_slice(), b.as_slice(), atol, rtol)
    }
}

impl OdeState for DVector<Complex64> {
    fn combine(&self, h: f64, terms: &[(f64, &Self)]) -> Self {
        let slices: Vec<(f64, &[Complex64])> =
            terms.iter().map(|&(c, k)| (c, k.as_slice())).collect();
        DVector::from_vec(combine_slices(Some(self.as_slice()), self.len(), h, &slices))
    }

    fn weighted_sum(&self, h: f64, terms: &[(f64, &Self)]) -> Self {
        let slices: Vec<(f64, &[Complex64])> =
            terms.iter().map(|&(c, k)| (c, k.as_slice())).collect();
        DVector::from_vec(combine_slices(None, self.len(), h, &slices))
    }

    fn error_norm(err: &Self, a: &Self, b: &Self, atol: f64, rtol: f64) -> f64 {
        error_norm_slices(err.as_slice(), a.as_slice(), b.as_slice(), atol, rtol)
    }
}

/// Adaptive stepper exposing single accepted steps, so callers (e.g. the
/// trajectory unraveling) can inspect the solution after every step and
/// re-integrate inside the last interval.
pub struct Stepper<'a, S, F>
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    f: &'a F,
    pub t: f64,
    pub y: S,
    h: f64,
    opts: OdeOptions,
    steps: usize,
    /// FSAL: derivative at (t, y), reused as stage 1 of the next step.
    k_last: S,
}

impl<'a, S, F> Stepper<'a, S, F>
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    pub fn new(f: &'a F, t0: f64, y0: S, opts: OdeOptions) -> Self {
        let k0 = f(t0, &y0);
        // Conservative initial step; the controller adapts within a few steps.
        let h0 = (opts.rtol.powf(0.2) * 0.1).min(opts.dt_max).max(1e-12);
        Self {
            f,
            t: t0,
            y: y0,
            h: h0,
            opts,
            steps: 0,
            k_last: k0,
        }
    }

    /// Take one accepted step, never stepping past `t_limit`.
    /// Returns true once `t_limit` is reached.
    pub fn step_towards(&mut self, t_limit: f64) -> Result<bool> {
        if self.t >= t_limit {
            return Ok(true);
        }
        loop {
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(Error::TooManySteps(self.steps));
            }
            let mut h = self.h.min(self.opts.dt_max);
            let clamped = self.t + h >= t_limit;
            if clamped {
                h = t_limit - self.t;
            }
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }

            let mut k: Vec<S> = Vec::with_capacity(STAGES);
            k.push(self.k_last.clone());
            for s in 1..STAGES {
                let terms: Vec<(f64, &S)> = (0..s)
                    .filter(|&j| A[s][j] != 0.0)
                    .map(|j| (A[s][j], &k[j]))
                    .collect();
                let ys = self.y.combine(h, &terms);
                k.push((self.f)(self.t + C[s] * h, &ys));
            }
            // Stage 7 input equals the fifth-order solution (FSAL).
            let terms5: Vec<(f64, &S)> = (0..STAGES)
                .filter(|&j| B5[j] != 0.0)
                .map(|j| (B5[j], &k[j]))
                .collect();
            let y_new = self.y.combine(h, &terms5);
            let terms_err: Vec<(f64, &S)> = (0..STAGES)
                .filter(|&j| E[j] != 0.0)
                .map(|j| (E[j], &k[j]))
                .collect();
            let err_state = self.y.weighted_sum(h, &terms_err);
            let err = S::error_norm(&err_state, &self.y, &y_new, self.opts.atol, self.opts.rtol);

            let factor = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            if err <= 1.0 {
                self.t += h;
                self.k_last = k.pop().expect("seven stages");
                self.y = y_new;
                if !clamped {
                    self.h = h * factor;
                }
                return Ok(self.t >= t_limit);
            }
            self.h = h * factor;
        }
    }
}

/// Integrate from (t0, y0) to t1.
pub fn integrate_to<S, F>(f: &F, t0: f64, y0: S, t1: f64, opts: OdeOptions) -> Result<S>
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    let mut st = Stepper::new(f, t0, y0, opts);
    while !st.step_towards(t1)? {}
    Ok(st.y)
}

/// Integrate and record the state at each requested time (ascending).
pub fn integrate_with_snapshots<S, F>(
    f: &F,
    t0: f64,
    y0: S,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<S>>
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("snapshot times must ascend".into()));
    }
    if let Some(&first) = times.first() {
        if first < t0 {
            return Err(Error::InvalidParameter(
                "snapshot times precede start time".into(),
            ));
        }
    }
    let mut st = Stepper::new(f, t0, y0, opts);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while !st.step_towards(t)? {}
        out.push(st.y.clone());
    }
    Ok(out)
}
