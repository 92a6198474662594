//! JSON run configurations. Every file states its `schema_version` and is
//! rejected on unknown keys, so a config either means exactly what it says
//! or it does not parse.

use serde::Deserialize;
use ssns::quad::QuadratureRule;
use ssns::semigroup::{C0Family, DilationMethod};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn check_schema(version: u32) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Usage(format!(
            "unsupported schema_version {version}, this build reads {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

#[derive(Deserialize, Clone, Copy, Debug)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub grading_exponent: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            panels: 4,
            nodes_per_panel: 3,
            grading_exponent: 2.0,
        }
    }
}

impl QuadSpec {
    pub fn rule(&self) -> QuadratureRule {
        QuadratureRule {
            panels: self.panels,
            nodes_per_panel: self.nodes_per_panel,
            grading_exponent: self.grading_exponent,
        }
    }
}

/// Initial data: a Gaussian vortex of the given width, sized by exactly one
/// of three rules — a plain pointwise amplitude, a target Lᵖ norm, or a
/// fraction of the smallness threshold 1/(12 c₀² c₁) in Lᵖ.
#[derive(Deserialize, Clone, Copy, Debug)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub width: f64,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub target_lp_norm: Option<f64>,
    #[serde(default)]
    pub certified_fraction: Option<f64>,
}

impl DataSpec {
    pub fn build(
        &self,
        grid: ssns::Grid,
        p: f64,
        constants: Option<(f64, f64)>,
    ) -> Result<ssns::VectorField, CliError> {
        let set = [self.amplitude, self.target_lp_norm, self.certified_fraction]
            .iter()
            .flatten()
            .count();
        if set != 1 {
            return Err(CliError::Usage(
                "data must set exactly one of amplitude, target_lp_norm, certified_fraction"
                    .to_string(),
            ));
        }
        let raw = ssns::synth::gaussian_vortex(grid, self.width, 1.0);
        if let Some(a) = self.amplitude {
            return Ok(raw.scaled(a));
        }
        let target = if let Some(t) = self.target_lp_norm {
            t
        } else {
            let f = self.certified_fraction.unwrap();
            let (c0, c1) = constants.ok_or_else(|| {
                CliError::Usage(
                    "certified_fraction needs the smoothing constants; this command has none"
                        .to_string(),
                )
            })?;
            f / (12.0 * c0 * c0 * c1)
        };
        let nrm = ssns::ops::lp_norm(&raw, p)?;
        Ok(raw.scaled(target / nrm))
    }
}

fn default_gammas() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 0.75, 0.9]
}

fn default_samples() -> usize {
    100_000
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct VerifyLemmasConfig {
    pub schema_version: u32,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Extra (K0, M) pairs to iterate and report; informative rows, never
    /// failures (an uncertified recurrence is a finding, not a bug).
    #[serde(default)]
    pub extra_recurrence: Vec<(f64, f64)>,
}

impl Default for VerifyLemmasConfig {
    fn default() -> Self {
        VerifyLemmasConfig {
            schema_version: SCHEMA_VERSION,
            gammas: default_gammas(),
            samples: default_samples(),
            extra_recurrence: Vec::new(),
        }
    }
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct EstimateC0Config {
    pub schema_version: u32,
    pub n: usize,
    pub box_side: f64,
    pub p_tilde: f64,
    pub q_tilde: f64,
    #[serde(default)]
    pub gradient: bool,
    /// Test family override; the default family's noise seeds are shifted
    /// by the `--seed` flag, an explicit family is used verbatim.
    #[serde(default)]
    pub family: Option<C0Family>,
}

impl Default for EstimateC0Config {
    fn default() -> Self {
        EstimateC0Config {
            schema_version: SCHEMA_VERSION,
            n: 32,
            box_side: 12.0,
            p_tilde: 4.0,
            q_tilde: 4.0,
            gradient: false,
            family: None,
        }
    }
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct PicardCliConfig {
    pub schema_version: u32,
    pub n: usize,
    pub box_side: f64,
    pub p: f64,
    pub data: DataSpec,
    pub tau_max: f64,
    pub tau_nodes: usize,
    #[serde(default)]
    pub quadrature: QuadSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub dilation: DilationMethod,
    /// Measured on the run's grid when absent.
    #[serde(default)]
    pub c0: Option<f64>,
    /// Closed-form value at gamma = 3/p when absent.
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub dump_fields: bool,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    20
}

impl Default for PicardCliConfig {
    fn default() -> Self {
        PicardCliConfig {
            schema_version: SCHEMA_VERSION,
            n: 32,
            box_side: 12.0,
            p: 4.0,
            data: DataSpec {
                width: 2.0,
                amplitude: None,
                target_lp_norm: None,
                certified_fraction: Some(0.8),
            },
            tau_max: 3.0,
            tau_nodes: 9,
            quadrature: QuadSpec::default(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            dilation: DilationMethod::default(),
            c0: None,
            c1: None,
            dump_fields: false,
        }
    }
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct DirectCliConfig {
    pub schema_version: u32,
    pub n: usize,
    pub box_side: f64,
    pub p: f64,
    pub data: DataSpec,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    /// Number of recorded slices, uniformly spaced on [0, t_end].
    #[serde(default = "default_record_nodes")]
    pub record_nodes: usize,
    #[serde(default)]
    pub dump_fields: bool,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_record_nodes() -> usize {
    6
}

impl Default for DirectCliConfig {
    fn default() -> Self {
        DirectCliConfig {
            schema_version: SCHEMA_VERSION,
            n: 24,
            box_side: 12.0,
            p: 4.0,
            data: DataSpec {
                width: 2.0,
                amplitude: Some(0.05),
                target_lp_norm: None,
                certified_fraction: None,
            },
            dt: 0.02,
            t_end: 1.0,
            cfl_safety: default_cfl(),
            record_nodes: default_record_nodes(),
            dump_fields: false,
        }
    }
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub n: usize,
    pub box_side: f64,
    pub p: f64,
    pub data: DataSpec,
    pub tau_max: f64,
    pub tau_nodes: usize,
    #[serde(default)]
    pub quadrature: QuadSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Assumed singularity time of the physical-frame trace.
    #[serde(default = "default_t_sing")]
    pub t_sing: f64,
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default)]
    pub c1: Option<f64>,
}

fn default_t_sing() -> f64 {
    1.0
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            n: 32,
            box_side: 12.0,
            p: 4.0,
            data: DataSpec {
                width: 2.0,
                amplitude: None,
                target_lp_norm: None,
                certified_fraction: Some(0.8),
            },
            tau_max: 3.0,
            tau_nodes: 9,
            quadrature: QuadSpec::default(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            t_sing: default_t_sing(),
            c0: None,
            c1: None,
        }
    }
}

/// Read a config from `path`, or fall back to the command's defaults when no
/// file was given. Parse and schema failures are usage errors (exit 2).
pub fn load<T>(path: Option<&std::path::Path>) -> Result<T, CliError>
where
    T: serde::de::DeserializeOwned + Default,
{
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("cannot parse {}: {e}", p.display())))
        }
    }
}
