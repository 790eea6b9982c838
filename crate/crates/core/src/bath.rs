//! Bath spectral functions W(E), their derivatives, bath-correlation
//! functions C(t) and derived timescales.
//!
//! Three thermal bath families are supported:
//! - pure ohmic, J(E) = gamma E, W(E) = J(E)/(e^{E/T} - 1), purely real;
//! - Drude-Lorentz, J_D(E) = gamma E / (1 + E^2/E_D^2), with a nontrivial
//!   imaginary part carried by a Matsubara sum;
//! - flat bosonic particle reservoir with chemical potential mu and the two
//!   channels W_1(E) = gamma n_B(E) (absorption) and
//!   W_2(E) = gamma (1 + n_B(-E)) (emission), imaginary parts neglected.
//!
//! Note the asymmetry: imaginary parts are kept for the Drude-Lorentz family
//! only; the ohmic W is real by construction and the reservoir channels drop
//! their (small) imaginary parts.
//!
//! Derivatives W^(n)(eps0) are computed by Cauchy contour integration on a
//! circle that stays clear of all poles (Matsubara poles at spacing 2 pi T,
//! the Drude pole at i E_D, and the real reservoir pole at mu).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard cap on Matsubara summation terms.
const MATSUBARA_CAP: usize = 100_000;
/// Stop the Matsubara sum when the next term falls below this fraction of
/// the partial sum.
const MATSUBARA_RTOL: f64 = 1e-12;
/// Trapezoid points on the derivative contour.
const CONTOUR_POINTS: usize = 128;
/// Series branch for the Bose factor near E = 0.
const SERIES_THRESHOLD: f64 = 1e-4;
/// Riemann zeta(3), used to resum the 1/l^3 Matsubara tails exactly.
const ZETA3: f64 = 1.202_056_903_159_594_2;

/// Trilogarithm Li_3(e^{-x}) for x > 0.
///
/// Direct power series in q = e^{-x} for large x; near x = 0 the series
/// converges too slowly, so the standard expansion of Li_3(e^{-x}) in x is
/// used (valid for x < 2 pi), which also captures the x^2 ln x cusp
/// exactly. Taking x rather than q avoids the q -> 1 rounding loss.
pub(crate) fn li3_exp(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x > 0.5 {
        let q = (-x).exp();
        let mut acc = 0.0;
        let mut p = 1.0;
        for l in 1..200 {
            p *= q;
            let term = p / ((l * l * l) as f64);
            acc += term;
            if term < 1e-17 * acc.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        acc
    } else {
        let zeta2 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        // Li_3(e^{-x}) = zeta(3) - zeta(2) x + x^2/2 (3/2 - ln x)
        //               + sum_{k>=3} zeta(3-k) (-x)^k / k!
        // Only nonzero zeta(-2n+1) terms survive; x < 0.52 here, so k <= 13
        // bounds the truncation error near 1e-16.
        ZETA3 - zeta2 * x + 0.5 * x * x * (1.5 - x.ln()) + x.powi(3) / 12.0
            - x.powi(4) / 288.0
            + x.powi(6) / 86_400.0
            - x.powi(8) / 10_160_640.0
            + x.powi(10) / 870_912_000.0
            - x.powi(12) / 63_228_211_200.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BathFamily {
    PureOhmic,
    DrudeLorentz { e_d: f64 },
    BosonicReservoir { mu: f64 },
}

impl BathFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BathFamily::PureOhmic => "pure-ohmic",
            BathFamily::DrudeLorentz { .. } => "drude-lorentz",
            BathFamily::BosonicReservoir { .. } => "bosonic-reservoir",
        }
    }
}

/// Which spectral function a Redfield channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralChannel {
    /// W(E) of a thermal phonon bath (ohmic or Drude-Lorentz).
    Standard,
    /// W_1(E) = gamma n_B(E): particle absorption from the reservoir.
    Absorb,
    /// W_2(E) = gamma (1 + n_B(-E)): particle emission into the reservoir.
    Emit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub family: BathFamily,
    /// Dissipation strength gamma > 0.
    pub gamma: f64,
    /// Temperature T > 0 (k_B = 1).
    pub temperature: f64,
}

impl BathSpec {
    pub fn ohmic(gamma: f64, temperature: f64) -> Result<Self> {
        Self::validate(Self {
            family: BathFamily::PureOhmic,
            gamma,
            temperature,
        })
    }

    pub fn drude(gamma: f64, temperature: f64, e_d: f64) -> Result<Self> {
        if e_d <= 0.0 {
            return Err(Error::InvalidParameter("Drude cutoff E_D must be > 0".into()));
        }
        Self::validate(Self {
            family: BathFamily::DrudeLorentz { e_d },
            gamma,
            temperature,
        })
    }

    pub fn reservoir(gamma: f64, temperature: f64, mu: f64) -> Result<Self> {
        Self::validate(Self {
            family: BathFamily::BosonicReservoir { mu },
            gamma,
            temperature,
        })
    }

    fn validate(spec: Self) -> Result<Self> {
        if spec.temperature <= 0.0 {
            return Err(Error::InvalidParameter("temperature must be > 0".into()));
        }
        if spec.gamma <= 0.0 {
            return Err(Error::InvalidParameter("gamma must be > 0".into()));
        }
        Ok(spec)
    }

    /// Matsubara frequency nu_l = 2 pi T l.
    pub fn matsubara(&self, l: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.temperature * l as f64
    }

    fn check_family(&self, channel: SpectralChannel) -> Result<()> {
        let ok = match (channel, self.family) {
            (SpectralChannel::Standard, BathFamily::PureOhmic)
            | (SpectralChannel::Standard, BathFamily::DrudeLorentz { .. }) => true,
            (SpectralChannel::Absorb, BathFamily::BosonicReservoir { .. })
            | (SpectralChannel::Emit, BathFamily::BosonicReservoir { .. }) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::WrongBathFamily {
                expected: match channel {
                    SpectralChannel::Standard => "pure-ohmic or drude-lorentz",
                    _ => "bosonic-reservoir",
                },
                got: self.family.name(),
            })
        }
    }

    /// gamma z / (e^{z/T} - 1) with a series branch at the removable
    /// singularity z = 0.
    fn ohmic_w_complex(&self, z: Complex64) -> Complex64 {
        let t = self.temperature;
        let x = z / t;
        if x.norm() < SERIES_THRESHOLD {
            // x/(e^x - 1) = 1 - x/2 + x^2/12 - ...
            Complex64::new(self.gamma * t, 0.0) * (Complex64::new(1.0, 0.0) - x / 2.0 + x * x / 12.0)
        } else {
            self.gamma * z / (x.exp() - 1.0)
        }
    }

    fn drude_l_nearest_resonance(&self, e_d: f64) -> Option<usize> {
        let l = (e_d / (2.0 * std::f64::consts::PI * self.temperature)).round() as usize;
        if l >= 1 && (self.matsubara(l) - e_d).abs() < 1e-9 * e_d {
            Some(l)
        } else {
            None
        }
    }

    fn drude_w_complex(&self, e_d: f64, z: Complex64) -> Complex64 {
        let t = self.temperature;
        let gamma = self.gamma;
        let i = Complex64::new(0.0, 1.0);
        // Real-axis part J_D(z) n_B(z) = [gamma z / (e^{z/T}-1)] / (1 + z^2/E_D^2)
        let re_part = self.ohmic_w_complex(z) / (1.0 + z * z / (e_d * e_d));
        // Matsubara sum i sum_l 2 gamma T z f(nu_l) with
        // f(nu) = nu E_D^2 / ((E_D^2 - nu^2)(nu^2 + z^2)).
        // f decays like -E_D^2/nu^3; summing that tail exactly via zeta(3)
        // leaves a remainder g that decays like 1/nu^5, so the truncation
        // error stays below the adaptive tolerance instead of a 1/l^2 tail.
        let nu1 = self.matsubara(1);
        let mut sum = Complex64::new(-e_d * e_d * ZETA3 / nu1.powi(3), 0.0);
        for l in 1..=MATSUBARA_CAP {
            let nu = self.matsubara(l);
            let g = e_d * e_d * (nu * nu * (e_d * e_d - z * z) + e_d * e_d * z * z)
                / (nu.powi(3) * (e_d * e_d - nu * nu) * (nu * nu + z * z));
            sum += g;
            if g.norm() * l as f64 * 0.25 < MATSUBARA_RTOL * sum.norm().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        let mats = 2.0 * gamma * t * z * sum;
        // -i gamma E_D^2 / (2 (E_D^2 + z^2)) [z cot(E_D/2T) + E_D]
        let cot = 1.0 / (e_d / (2.0 * t)).tan();
        let tail = gamma * e_d * e_d / (2.0 * (e_d * e_d + z * z)) * (z * cot + e_d);
        re_part + i * mats - i * tail
    }

    fn reservoir_w_complex(&self, mu: f64, channel: SpectralChannel, z: Complex64) -> Complex64 {
        let t = self.temperature;
        match channel {
            // gamma n_B(z) = gamma / (e^{(z-mu)/T} - 1)
            SpectralChannel::Absorb => self.gamma / (((z - mu) / t).exp() - 1.0),
            // gamma (1 + n_B(-z)) = gamma / (1 - e^{(z+mu)/T})
            SpectralChannel::Emit => self.gamma / (1.0 - ((z + mu) / t).exp()),
            SpectralChannel::Standard => unreachable!(),
        }
    }

    /// Analytic continuation of the selected spectral function; no domain
    /// guards, used by the contour integrator.
    fn w_complex(&self, channel: SpectralChannel, z: Complex64) -> Result<Complex64> {
        self.check_family(channel)?;
        match self.family {
            BathFamily::PureOhmic => Ok(self.ohmic_w_complex(z)),
            BathFamily::DrudeLorentz { e_d } => {
                if let Some(l) = self.drude_l_nearest_resonance(e_d) {
                    return Err(Error::MatsubaraResonance { l, e_d });
                }
                Ok(self.drude_w_complex(e_d, z))
            }
            BathFamily::BosonicReservoir { mu } => Ok(self.reservoir_w_complex(mu, channel, z)),
        }
    }

    /// Spectral function at real energy E for the selected channel, with
    /// domain guards.
    pub fn w(&self, channel: SpectralChannel, e: f64) -> Result<Complex64> {
        self.check_family(channel)?;
        if let BathFamily::BosonicReservoir { mu } = self.family {
            match channel {
                SpectralChannel::Absorb if e - mu <= 0.0 => {
                    return Err(Error::BoseDivergence(e - mu));
                }
                SpectralChannel::Emit if -e - mu == 0.0 => {
                    return Err(Error::BoseDivergence(0.0));
                }
                _ => {}
            }
        }
        self.w_complex(channel, Complex64::new(e, 0.0))
    }

    /// W(E) of the pure ohmic bath.
    pub fn w_ohmic(&self, e: f64) -> Result<Complex64> {
        match self.family {
            BathFamily::PureOhmic => self.w(SpectralChannel::Standard, e),
            _ => Err(Error::WrongBathFamily {
                expected: "pure-ohmic",
                got: self.family.name(),
            }),
        }
    }

    /// W_D(E) of the Drude-Lorentz bath, including its imaginary part.
    pub fn w_drude(&self, e: f64) -> Result<Complex64> {
        match self.family {
            BathFamily::DrudeLorentz { .. } => self.w(SpectralChannel::Standard, e),
            _ => Err(Error::WrongBathFamily {
                expected: "drude-lorentz",
                got: self.family.name(),
            }),
        }
    }

    /// W_1 (channel = Absorb) or W_2 (channel = Emit) of the reservoir.
    pub fn w_reservoir(&self, e: f64, channel: SpectralChannel) -> Result<Complex64> {
        match self.family {
            BathFamily::BosonicReservoir { .. } => self.w(channel, e),
            _ => Err(Error::WrongBathFamily {
                expected: "bosonic-reservoir",
                got: self.family.name(),
            }),
        }
    }

    /// Distance from a real expansion energy to the nearest pole of the
    /// selected spectral function.
    pub fn nearest_pole_distance(&self, channel: SpectralChannel, eps0: f64) -> f64 {
        let nu1 = self.matsubara(1);
        match self.family {
            BathFamily::PureOhmic => eps0.hypot(nu1),
            BathFamily::DrudeLorentz { e_d } => eps0.hypot(nu1).min(eps0.hypot(e_d)),
            BathFamily::BosonicReservoir { mu } => {
                // Poles at z = -+mu + i nu_l (all l, including l = 0).
                let base = match channel {
                    SpectralChannel::Absorb => eps0 - mu,
                    _ => eps0 + mu,
                };
                base.abs()
            }
        }
    }

    /// Derivatives W^(0..n_max)(eps0) by Cauchy contour integration.
    pub fn w_derivatives(
        &self,
        channel: SpectralChannel,
        eps0: f64,
        n_max: usize,
    ) -> Result<Vec<Complex64>> {
        self.check_family(channel)?;
        let t = self.temperature;
        let base = match self.family {
            BathFamily::DrudeLorentz { e_d } => (std::f64::consts::PI * t).min(e_d / 2.0),
            _ => std::f64::consts::PI * t,
        };
        let pole_dist = self.nearest_pole_distance(channel, eps0);
        // Keep a safety margin to the nearest pole; the reservoir pole at
        // z = mu sits on the real axis and may be closer than pi T.
        let radius = base.min(0.75 * pole_dist);
        if !(radius > 0.0) || pole_dist <= radius {
            return Err(Error::ContourPole {
                eps0,
                radius: base,
                pole_dist,
            });
        }
        let m = CONTOUR_POINTS;
        let samples: Vec<Complex64> = (0..m)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                let z = Complex64::new(eps0 + radius * theta.cos(), radius * theta.sin());
                self.w_complex(channel, z)
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(n_max + 1);
        let mut factorial = 1.0_f64;
        for n in 0..=n_max {
            if n > 0 {
                factorial *= n as f64;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, wz) in samples.iter().enumerate() {
                let theta = 2.0 * std::f64::consts::PI * (j * n % m) as f64 / m as f64;
                acc += wz * Complex64::new(theta.cos(), -theta.sin());
            }
            out.push(acc * factorial / (m as f64 * radius.powi(n as i32)));
        }
        Ok(out)
    }

    /// Drude-Lorentz bath-correlation function C(t), t > 0.
    pub fn bath_correlation_drude(&self, t: f64) -> Result<Complex64> {
        let e_d = match self.family {
            BathFamily::DrudeLorentz { e_d } => e_d,
            _ => {
                return Err(Error::WrongBathFamily {
                    expected: "drude-lorentz",
                    got: self.family.name(),
                })
            }
        };
        if t <= 0.0 {
            return Err(Error::InvalidParameter("C(t) requires t > 0".into()));
        }
        if let Some(l) = self.drude_l_nearest_resonance(e_d) {
            return Err(Error::MatsubaraResonance { l, e_d });
        }
        let temp = self.temperature;
        let cot = 1.0 / (e_d / (2.0 * temp)).tan();
        let head =
            0.5 * self.gamma * e_d * e_d * Complex64::new(cot, -1.0) * (-e_d * t).exp();
        // Matsubara part sum_l h(nu_l) q^l with q = e^{-nu_1 t} and
        // h(nu) = nu E_D^2/(E_D^2 - nu^2) = -E_D^2/nu - E_D^4/nu^3 + k(nu),
        // k(nu) = E_D^6/(nu^3 (E_D^2 - nu^2)) ~ -E_D^6/nu^5.
        // The 1/l and 1/l^3 tails are the polylogarithms -ln(1-q) and
        // Li_3(q); resumming them keeps C(t) accurate uniformly in t,
        // including the ln(1/t) divergence at t -> 0+.
        let nu1 = self.matsubara(1);
        let x = nu1 * t;
        let q = (-x).exp();
        // 1 - q via expm1 so the t -> 0 logarithm stays accurate.
        let one_minus_q = -(-x).exp_m1();
        let mut sum =
            (e_d * e_d / nu1) * one_minus_q.ln() - e_d.powi(4) / nu1.powi(3) * li3_exp(x);
        let mut p = 1.0;
        for l in 1..=MATSUBARA_CAP {
            let nu = self.matsubara(l);
            p *= q;
            let term = e_d.powi(6) / (nu.powi(3) * (e_d * e_d - nu * nu)) * p;
            sum += term;
            if term.abs() * l as f64 * 0.25 < MATSUBARA_RTOL * sum.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(head - Complex64::new(2.0 * self.gamma * temp * sum, 0.0))
    }

    /// Bath-correlation time: the longest decay timescale of C(t).
    ///
    /// High-temperature expression 1/(2 pi T); for a Drude bath with
    /// E_D < 2 pi T the cutoff exponential decays slowest instead.
    pub fn bath_correlation_time(&self) -> Result<f64> {
        let nu1 = self.matsubara(1);
        match self.family {
            BathFamily::PureOhmic => Ok(1.0 / nu1),
            BathFamily::DrudeLorentz { e_d } => Ok(1.0 / nu1.min(e_d)),
            BathFamily::BosonicReservoir { .. } => Err(Error::Unsupported(
                "bath-correlation time is defined for ohmic and Drude-Lorentz baths".into(),
            )),
        }
    }
}
