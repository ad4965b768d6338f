//! TOML configuration ingestion: file schema, dotted-key overrides, and
//! conversion into a validated ProblemSpec.

use serde::{Deserialize, Serialize};

use crate::energy::PotentialSpec;
use crate::model::{ForcingSpec, Matrix, ProblemSpec, SpaceGeometry, StateVector};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub geometry: GeometryConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub dim: usize,
    #[serde(default)]
    pub h_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub v_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    /// Quadratic: stiffness matrix rows.
    #[serde(default)]
    pub stiffness: Option<Vec<Vec<f64>>>,
    /// Double well: the parameter a.
    #[serde(default)]
    pub well_param: Option<f64>,
    /// Custom polynomial: odd coefficients per coordinate, and constants.
    #[serde(default)]
    pub coeffs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub shift: Option<f64>,
    #[serde(default)]
    pub c_b: Option<f64>,
    #[serde(default)]
    pub big_c_b: Option<f64>,
    #[serde(default)]
    pub c_b_prime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: String,
    #[serde(default)]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub lip_u: Option<f64>,
    #[serde(default)]
    pub holder_t: Option<f64>,
    #[serde(default)]
    pub mod_amp: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub u0: Vec<f64>,
    pub horizon: f64,
    pub epsilon: f64,
    pub dt: f64,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Default tau step for reparametrization (dt/2 when absent).
    #[serde(default)]
    pub tau_step: Option<f64>,
    #[serde(default)]
    pub forcing: Option<ForcingConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub kind: String,
    #[serde(default)]
    pub value: Option<Vec<f64>>,
    #[serde(default)]
    pub rate: Option<Vec<f64>>,
    #[serde(default)]
    pub amplitude: Option<Vec<f64>>,
    #[serde(default)]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub dt_list: Option<Vec<f64>>,
}

/// Parse a config, apply dotted `key=value` overrides, and deserialize.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ConfigFile> {
    let mut value: toml::Value = toml::from_str(text)
        .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    apply_overrides(&mut value, overrides)?;
    value
        .try_into()
        .map_err(|e| Error::Config(format!("config error: {e}")))
}

pub fn load_config(path: &std::path::Path, overrides: &[String]) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

/// Apply `a.b.c=value` overrides onto the raw TOML tree. The value side is
/// parsed as TOML when possible, otherwise taken as a string.
pub fn apply_overrides(value: &mut toml::Value, overrides: &[String]) -> Result<()> {
    for entry in overrides {
        let (key, raw) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{entry}' is not key=value")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("override '{entry}' has an empty key")));
        }
        let parsed = parse_override_value(raw.trim());
        let parts: Vec<&str> = key.split('.').collect();
        let (last, parents) = parts.split_last().expect("key is non-empty");
        let mut table = value.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override key '{key}' crosses a non-table value"))
        })?;
        for part in parents {
            table = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()))
                .as_table_mut()
                .ok_or_else(|| {
                    Error::Config(format!("override key '{key}' crosses a non-table value"))
                })?;
        }
        table.insert(last.to_string(), parsed);
    }
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Canonical serialized form of the resolved configuration. Used for the
/// manifest digest and for re-running from a stored run directory.
pub fn resolved_toml(config: &ConfigFile) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

impl ConfigFile {
    pub fn to_problem_spec(&self) -> Result<ProblemSpec> {
        let dim = self.geometry.dim;
        let geometry = SpaceGeometry::new(
            dim,
            self.geometry
                .h_weights
                .clone()
                .unwrap_or_else(|| vec![1.0; dim]),
            self.geometry
                .v_weights
                .clone()
                .unwrap_or_else(|| vec![1.0; dim]),
            self.geometry.p.unwrap_or(2.0),
        )?;

        let potential = match self.potential.kind.as_str() {
            "quadratic" => match &self.potential.stiffness {
                Some(rows) => PotentialSpec::quadratic(Matrix::from_rows(rows)?)?,
                None => PotentialSpec::quadratic_identity(dim),
            },
            "double_well" => {
                let a = self.potential.well_param.ok_or_else(|| {
                    Error::Config("double_well potential needs well_param".into())
                })?;
                PotentialSpec::double_well(a)?
            }
            "custom_polynomial" => {
                let coeffs = self.potential.coeffs.clone().ok_or_else(|| {
                    Error::Config("custom_polynomial potential needs coeffs".into())
                })?;
                PotentialSpec::custom_polynomial(
                    coeffs,
                    self.potential.shift.unwrap_or(0.0),
                    self.potential.c_b.unwrap_or(0.0),
                    self.potential.big_c_b.unwrap_or(1.0),
                    self.potential.c_b_prime.unwrap_or(0.0),
                )?
            }
            other => {
                return Err(Error::Config(format!("unknown potential kind '{other}'")))
            }
        };

        let noise = match &self.noise {
            None => NoiseSpec::off(dim),
            Some(nc) => {
                let kind = match nc.kind.as_str() {
                    "off" => NoiseKind::Off,
                    "additive_constant" => NoiseKind::AdditiveConstant,
                    "multiplicative_linear" => NoiseKind::MultiplicativeLinear,
                    "time_modulated" => NoiseKind::TimeModulated,
                    other => {
                        return Err(Error::Config(format!("unknown noise kind '{other}'")))
                    }
                };
                if kind == NoiseKind::Off {
                    NoiseSpec::off(dim)
                } else {
                    let rows = nc.sigma.clone().ok_or_else(|| {
                        Error::Config(format!("noise kind '{}' needs sigma", nc.kind))
                    })?;
                    let sigma = Matrix::from_rows(&rows)?;
                    NoiseSpec {
                        u_dim: sigma.cols,
                        kind,
                        sigma,
                        lip_u: nc.lip_u.unwrap_or(0.0),
                        holder_t: nc.holder_t.unwrap_or(1.0),
                        mod_amp: nc.mod_amp.unwrap_or(0.0),
                        nu: nc.nu.unwrap_or(1.0),
                    }
                }
            }
        };

        let forcing = match &self.run.forcing {
            None => ForcingSpec::Off,
            Some(fc) => match fc.kind.as_str() {
                "off" => ForcingSpec::Off,
                "constant" => ForcingSpec::Constant {
                    value: fc
                        .value
                        .clone()
                        .ok_or_else(|| Error::Config("constant forcing needs value".into()))?,
                },
                "ramp" => ForcingSpec::Ramp {
                    rate: fc
                        .rate
                        .clone()
                        .ok_or_else(|| Error::Config("ramp forcing needs rate".into()))?,
                },
                "sine" => ForcingSpec::Sine {
                    amplitude: fc.amplitude.clone().ok_or_else(|| {
                        Error::Config("sine forcing needs amplitude".into())
                    })?,
                    omega: fc
                        .omega
                        .ok_or_else(|| Error::Config("sine forcing needs omega".into()))?,
                },
                other => {
                    return Err(Error::Config(format!("unknown forcing kind '{other}'")))
                }
            },
        };

        let spec = ProblemSpec {
            geometry,
            potential,
            noise,
            forcing,
            u0: StateVector::new(self.run.u0.clone())?,
            horizon: self.run.horizon,
            epsilon: self.run.epsilon,
            dt: self.run.dt,
            n_paths: self.run.n_paths.unwrap_or(1),
            seed: self.run.seed.unwrap_or(0),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tau_step(&self) -> f64 {
        self.run.tau_step.unwrap_or(self.run.dt / 2.0)
    }
}
