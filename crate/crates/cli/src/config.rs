//! Experiment configuration: TOML with named sections.

use serde::{Deserialize, Serialize};

use qme_core::bath::BathSpec;
use qme_core::error::{Error as CoreError, Result as CoreResult};
use qme_core::expansion::{ExpansionMode, ExpansionPolicy};
use qme_core::models::{
    build_bose_hubbard, build_xxz, BoseHubbardSpec, CouplingChannel, XxzSpec,
};
use qme_core::operator::{LatticeSpec, SparseOperator};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub baths: Vec<BathSection>,
    pub method: MethodSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSection {
    Xxz {
        l: usize,
        j: f64,
        delta: f64,
        h: f64,
        #[serde(default)]
        delta_field: f64,
    },
    BoseHubbard {
        l: usize,
        j: f64,
        u: f64,
        n_cut: usize,
        #[serde(default)]
        trap: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub site: usize,
    /// Coupling operator: "sx" for spin chains; "reservoir-pair" adds the
    /// absorb/emit channel pair of a particle reservoir.
    pub operator: String,
    /// "ohmic" | "drude" | "reservoir"
    pub family: String,
    pub gamma: f64,
    pub temperature: f64,
    #[serde(default)]
    pub e_d: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    /// exact-redfield | adhoc-redfield | local-redfield | adhoc-lindblad |
    /// local-lindblad | standard-local-lindblad
    pub kind: String,
    #[serde(default)]
    pub order: usize,
    #[serde(default)]
    pub eps0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// "all-up" | "x-polarized" | "maximally-mixed" (evolve only)
    pub initial_state: String,
    pub t_max: f64,
    pub n_points: usize,
    /// Relaxation horizon for time-averaged distances (defaults to 1/gamma).
    pub tau_r: Option<f64>,
    pub ss_residual_tol: f64,
    pub n_traj: usize,
    pub jump_tol: f64,
    /// Observable families: "sz" | "purity" | "populations" | "currents"
    pub observables: Vec<String>,
    pub record_jumps: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            initial_state: "all-up".into(),
            t_max: 10.0,
            n_points: 51,
            tau_r: None,
            ss_residual_tol: 1e-10,
            n_traj: 1000,
            jump_tol: 1e-8,
            observables: vec!["sz".into()],
            record_jumps: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// "temperature" | "eps0" | "order"
    pub parameter: String,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Expansion orders compared at each sweep point.
    #[serde(default)]
    pub orders: Vec<usize>,
    /// Methods compared at each sweep point (error-sweep).
    #[serde(default)]
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: String,
    pub stem: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: "csv".into(),
            stem: "result".into(),
        }
    }
}

/// Everything the commands need, built once from the config.
pub struct Experiment {
    pub lattice: LatticeSpec,
    pub hamiltonian: SparseOperator,
    pub channels: Vec<CouplingChannel>,
    pub xxz: Option<XxzSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        const METHODS: [&str; 6] = [
            "exact-redfield",
            "adhoc-redfield",
            "local-redfield",
            "adhoc-lindblad",
            "local-lindblad",
            "standard-local-lindblad",
        ];
        if !METHODS.contains(&self.method.kind.as_str()) {
            return Err(format!(
                "method.kind: unknown method `{}` (expected one of {METHODS:?})",
                self.method.kind
            ));
        }
        for (i, b) in self.baths.iter().enumerate() {
            match b.family.as_str() {
                "ohmic" => {}
                "drude" => {
                    if b.e_d.is_none() {
                        return Err(format!("baths[{i}].e_d: required for the drude family"));
                    }
                }
                "reservoir" => {
                    if b.mu.is_none() {
                        return Err(format!("baths[{i}].mu: required for the reservoir family"));
                    }
                }
                other => return Err(format!("baths[{i}].family: unknown family `{other}`")),
            }
        }
        if let Some(s) = &self.sweep {
            match s.parameter.as_str() {
                "temperature" | "eps0" => {
                    if s.values.is_empty() {
                        return Err("sweep.values: must be nonempty".into());
                    }
                }
                "order" => {
                    if s.orders.is_empty() {
                        return Err("sweep.orders: must be nonempty".into());
                    }
                }
                other => return Err(format!("sweep.parameter: unknown parameter `{other}`")),
            }
        }
        if self.run.n_points < 2 {
            return Err("run.n_points: must be >= 2".into());
        }
        match self.output.format.as_str() {
            "csv" | "json" => Ok(()),
            other => Err(format!("output.format: unknown format `{other}`")),
        }
    }

    pub fn bath_spec(b: &BathSection) -> CoreResult<BathSpec> {
        match b.family.as_str() {
            "ohmic" => BathSpec::ohmic(b.gamma, b.temperature),
            "drude" => BathSpec::drude(b.gamma, b.temperature, b.e_d.unwrap_or(30.0)),
            "reservoir" => BathSpec::reservoir(b.gamma, b.temperature, b.mu.unwrap_or(0.0)),
            other => Err(CoreError::InvalidParameter(format!("bath family {other}"))),
        }
    }

    /// Build the model, Hamiltonian and coupling channels.
    pub fn build(&self) -> CoreResult<Experiment> {
        match &self.model {
            ModelSection::Xxz {
                l,
                j,
                delta,
                h,
                delta_field,
            } => {
                let spec = XxzSpec {
                    l: *l,
                    j: *j,
                    delta: *delta,
                    h: *h,
                    delta_field: *delta_field,
                };
                let lattice = LatticeSpec::spin_chain(*l)?;
                let hamiltonian = build_xxz(&spec, &lattice)?;
                let mut channels = Vec::new();
                for b in &self.baths {
                    if b.operator != "sx" {
                        return Err(CoreError::Unsupported(format!(
                            "operator `{}` on a spin chain (only `sx`)",
                            b.operator
                        )));
                    }
                    let bath = Self::bath_spec(b)?;
                    channels.push(CouplingChannel::xxz_boundary(&lattice, &spec, b.site, bath)?);
                }
                Ok(Experiment {
                    lattice,
                    hamiltonian,
                    channels,
                    xxz: Some(spec),
                })
            }
            ModelSection::BoseHubbard { l, j, u, n_cut, trap } => {
                let spec = BoseHubbardSpec {
                    l: *l,
                    j: *j,
                    u: *u,
                    n_cut: *n_cut,
                    trap: if trap.is_empty() { vec![0.0; *l] } else { trap.clone() },
                };
                let lattice = LatticeSpec::boson_chain(*l, *n_cut)?;
                let hamiltonian = build_bose_hubbard(&spec, &lattice)?;
                let mut channels = Vec::new();
                for b in &self.baths {
                    if b.operator != "reservoir-pair" {
                        return Err(CoreError::Unsupported(format!(
                            "operator `{}` on a boson chain (only `reservoir-pair`)",
                            b.operator
                        )));
                    }
                    if b.site != 0 {
                        return Err(CoreError::Unsupported(
                            "the particle reservoir couples to site 0".into(),
                        ));
                    }
                    let bath = Self::bath_spec(b)?;
                    channels.extend(CouplingChannel::bose_hubbard_reservoir(&lattice, &spec, bath)?);
                }
                Ok(Experiment {
                    lattice,
                    hamiltonian,
                    channels,
                    xxz: None,
                })
            }
        }
    }

    pub fn expansion_policy(&self) -> ExpansionPolicy {
        let mode = match self.method.kind.as_str() {
            "adhoc-redfield" | "adhoc-lindblad" => ExpansionMode::AdHoc {
                eps0: self.method.eps0,
            },
            _ => ExpansionMode::Local,
        };
        ExpansionPolicy {
            order: self.method.order,
            mode,
        }
    }

    /// Override every bath temperature (temperature sweeps).
    pub fn with_temperature(&self, t: f64) -> Self {
        let mut cfg = self.clone();
        for b in &mut cfg.baths {
            b.temperature = t;
        }
        cfg
    }
}
