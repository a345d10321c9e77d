//! Scenario definitions: the JSON config schema, its validation into core
//! types, and the four built-in presets.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use cuk_pllf_core::{
    coefficients_from_spec, ConverterParams, Error as CoreError, IndexSet, OperatingSpec,
    PolytopeSpec, SimConfig, Vec4,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const PRESET_NAMES: [&str; 4] = ["fig2", "fig3", "fig4", "fig5"];

const PRESET_DURATION: f64 = 5e-3;

/// On-disk layout of a scenario config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub params: ParamsFile,
    pub op: OpFile,
    pub polytope: PolytopeFile,
    #[serde(default)]
    pub sim: SimFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ParamsFile {
    pub L1: f64,
    pub L2: f64,
    pub C1: f64,
    pub C2: f64,
    pub R: f64,
    pub v_in: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct OpFile {
    pub d: f64,
    pub T_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct PolytopeFile {
    pub J: Vec<usize>,
    #[serde(default)]
    pub k2_fraction: f64,
    #[serde(default)]
    pub k4_fraction: f64,
    /// Raw coefficients (`"k1"`..`"k4"`) replacing the constructed ones.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub k_override: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_dwell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<f64>,
}

/// A validated, ready-to-run scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: ConverterParams,
    pub op: OperatingSpec,
    pub polytope: PolytopeSpec,
    pub k2_fraction: f64,
    pub k4_fraction: f64,
    pub sim: SimConfig,
}

fn annotate(section: &str, err: CoreError) -> CliError {
    match &err {
        CoreError::InvalidArgument { name, .. } => {
            CliError::config(format!("{section}.{name}"), err)
        }
        _ => CliError::config(section, err),
    }
}

impl ScenarioFile {
    /// Validates every section, reporting the first bad key by its path.
    pub fn into_scenario(self, fallback_name: &str) -> Result<Scenario, CliError> {
        let p = &self.params;
        let params = ConverterParams::new(p.L1, p.L2, p.C1, p.C2, p.R, p.v_in)
            .map_err(|e| annotate("params", e))?;
        let op = OperatingSpec::new(self.op.d, self.op.T_s).map_err(|e| annotate("op", e))?;

        let poly = &self.polytope;
        let indices = IndexSet::from_indices(&poly.J).map_err(|e| annotate("polytope", e))?;
        let mut polytope =
            coefficients_from_spec(&params, &op, indices, poly.k2_fraction, poly.k4_fraction)
                .map_err(|e| annotate("polytope", e))?;
        for (key, &value) in &poly.k_override {
            let path = format!("polytope.k_override.{key}");
            let j = match key.as_str() {
                "k1" => 1,
                "k2" => 2,
                "k3" => 3,
                "k4" => 4,
                _ => return Err(CliError::config(path, "expected one of k1, k2, k3, k4")),
            };
            polytope = polytope
                .with_coefficient(j, value)
                .map_err(|e| CliError::config(path, e))?;
        }

        let defaults = SimConfig::defaults(&op, PRESET_DURATION);
        let s = &self.sim;
        let sim = SimConfig {
            duration: s.duration.unwrap_or(defaults.duration),
            x0: s.x0.map(Vec4::new).unwrap_or(defaults.x0),
            max_step: s.max_step.unwrap_or(defaults.max_step),
            event_tol: s.event_tol.unwrap_or(defaults.event_tol),
            min_dwell: s.min_dwell.unwrap_or(defaults.min_dwell),
            sample_stride: s.sample_stride.unwrap_or(defaults.sample_stride),
        };
        sim.validate().map_err(|e| annotate("sim", e))?;

        Ok(Scenario {
            name: self.name.unwrap_or_else(|| fallback_name.to_string()),
            params,
            op,
            polytope,
            k2_fraction: poly.k2_fraction,
            k4_fraction: poly.k4_fraction,
            sim,
        })
    }
}

fn preset_file(name: &str) -> Option<ScenarioFile> {
    let (j, k2, k4): (&[usize], f64, f64) = match name {
        "fig2" => (&[1, 2], -0.5, 0.0),
        "fig3" => (&[1, 2], 0.5, 0.0),
        "fig4" => (&[1, 2, 3], -0.5, 0.0),
        "fig5" => (&[1, 2, 3, 4], -0.75, -0.00125),
        _ => return None,
    };
    let p = ConverterParams::reference();
    Some(ScenarioFile {
        name: Some(name.to_string()),
        params: ParamsFile {
            L1: p.l1,
            L2: p.l2,
            C1: p.c1,
            C2: p.c2,
            R: p.r,
            v_in: p.v_in,
        },
        op: OpFile { d: 0.5, T_s: 1e-5 },
        polytope: PolytopeFile {
            J: j.to_vec(),
            k2_fraction: k2,
            k4_fraction: k4,
            k_override: BTreeMap::new(),
        },
        sim: SimFile {
            duration: Some(PRESET_DURATION),
            x0: Some([0.0; 4]),
            ..SimFile::default()
        },
    })
}

/// One-line description of a preset.
pub fn preset_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2" => "J = {1, 2}, k2 = -20 /A (negative output-current coefficient)",
        "fig3" => "J = {1, 2}, k2 = +20 /A (positive output-current coefficient)",
        "fig4" => "J = {1, 2, 3}, k2 = -20 /A, k3 = -0.2 /V",
        "fig5" => "J = {1, 2, 3, 4}, k2 = -30 /A, k3 = -0.2 /V, k4 = -0.8 /V",
        _ => return None,
    })
}

/// The serialized form of a built-in preset, as it would appear in a config.
pub fn preset_config(name: &str) -> Option<ScenarioFile> {
    preset_file(name)
}

pub fn preset(name: &str) -> Option<Scenario> {
    preset_file(name).map(|f| f.into_scenario(name).expect("built-in presets are valid"))
}

/// Reads and validates a JSON scenario config.
pub fn load_config(path: &Path) -> Result<Scenario, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_reader(BufReader::new(file));
    let parsed: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(path, e.into_inner())
    })?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    parsed.into_scenario(stem)
}

/// A preset name or a path to a config file.
pub fn resolve(target: &str) -> Result<Scenario, CliError> {
    if let Some(s) = preset(target) {
        return Ok(s);
    }
    let path = Path::new(target);
    if path.is_file() {
        load_config(path)
    } else {
        Err(CliError::UnknownTarget(target.to_string()))
    }
}
