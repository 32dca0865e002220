//! Experiment presets and TOML configuration.
//!
//! A configuration names a preset and may override any part of it:
//!
//! ```toml
//! preset = "fixateur"
//! output_every = 8
//!
//! [mesh]
//! target_edge = 2.5
//!
//! [parameters]
//! dt = 0.0625
//! ```
//!
//! Every omitted key keeps its preset or calibrated default and unknown keys
//! are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{validate_parameters, ParamViolation, ParameterSet};
use crate::mesh::{build_cylinder_mesh, FixateurSpec, Mesh, MeshError};
use crate::report::ValidationReport;

/// Axial traction in the experiment with the plate attached (GPa).
pub const FIXATEUR_TRACTION: f64 = 0.001;
/// Reduced traction for the free cylinder, 70% of the plated value (GPa).
pub const FREE_TRACTION: f64 = 0.0007;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fixateur,
    NoFixateur,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fixateur => "fixateur",
            Preset::NoFixateur => "no-fixateur",
        }
    }

    pub fn traction(self) -> f64 {
        match self {
            Preset::Fixateur => FIXATEUR_TRACTION,
            Preset::NoFixateur => FREE_TRACTION,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cylinder geometry and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    /// Defect length (mm).
    pub length: f64,
    /// Defect radius (mm).
    pub radius: f64,
    /// Target element edge (mm).
    pub target_edge: f64,
    /// Plate geometry; `None` meshes the bare cylinder.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixateur: Option<FixateurSpec>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            length: 30.0,
            radius: 10.0,
            target_edge: 2.5,
            fixateur: None,
        }
    }
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh, MeshError> {
        build_cylinder_mesh(
            self.length,
            self.radius,
            self.target_edge,
            self.fixateur.as_ref(),
        )
    }
}

/// One experiment: geometry, boundary data and output cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub preset: Preset,
    pub mesh: MeshSpec,
    /// Axial traction on the loaded cap (GPa).
    pub traction: f64,
    /// Molecule concentration held at the bone interfaces.
    pub molecule_dirichlet: f64,
    /// Initial molecule concentration away from the interfaces.
    pub initial_molecules: f64,
    /// Store every k-th step (the final step is always stored).
    pub output_every: usize,
}

impl Scenario {
    pub fn preset(preset: Preset) -> Self {
        let fixateur = match preset {
            Preset::Fixateur => Some(FixateurSpec::default()),
            Preset::NoFixateur => None,
        };
        Self {
            name: preset.name().to_string(),
            preset,
            mesh: MeshSpec {
                fixateur,
                ..MeshSpec::default()
            },
            traction: preset.traction(),
            molecule_dirichlet: 1.0,
            initial_molecules: 0.0,
            output_every: 8,
        }
    }

    pub fn has_fixateur(&self) -> bool {
        self.mesh.fixateur.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioViolation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ScenarioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl From<ParamViolation> for ScenarioViolation {
    fn from(v: ParamViolation) -> Self {
        Self {
            field: format!("parameters.{}", v.field),
            message: v.message,
        }
    }
}

/// Scenario checks plus the parameter checks, in one report.
pub fn validate_scenario(
    scenario: &Scenario,
    params: &ParameterSet,
) -> ValidationReport<ScenarioViolation> {
    let mut report: ValidationReport<ScenarioViolation> = validate_parameters(params)
        .into_vec()
        .into_iter()
        .map(ScenarioViolation::from)
        .collect();
    let mut fail = |field: &str, message: String| {
        report.push(ScenarioViolation {
            field: field.to_string(),
            message,
        })
    };
    if !(scenario.traction >= 0.0) || !scenario.traction.is_finite() {
        fail("traction", format!("must be finite and >= 0, got {}", scenario.traction));
    }
    if scenario.traction != params.traction {
        fail(
            "traction",
            format!(
                "scenario traction {} differs from parameter traction {}",
                scenario.traction, params.traction
            ),
        );
    }
    if !(scenario.molecule_dirichlet >= 0.0) || !scenario.molecule_dirichlet.is_finite() {
        fail(
            "molecule_dirichlet",
            format!("must be finite and >= 0, got {}", scenario.molecule_dirichlet),
        );
    }
    if !(scenario.initial_molecules >= 0.0) || !scenario.initial_molecules.is_finite() {
        fail(
            "initial_molecules",
            format!("must be finite and >= 0, got {}", scenario.initial_molecules),
        );
    }
    if scenario.output_every == 0 {
        fail("output_every", "must be at least 1".to_string());
    }
    let m = &scenario.mesh;
    for (name, value) in [
        ("mesh.length", m.length),
        ("mesh.radius", m.radius),
        ("mesh.target_edge", m.target_edge),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            fail(name, format!("must be positive, got {value}"));
        }
    }
    if m.target_edge >= m.radius {
        fail(
            "mesh.target_edge",
            format!("{} is not smaller than the radius {}", m.target_edge, m.radius),
        );
    }
    if let Some(plate) = &m.fixateur {
        for (name, value) in [
            ("mesh.fixateur.length", plate.length),
            ("mesh.fixateur.width", plate.width),
            ("mesh.fixateur.thickness", plate.thickness),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                fail(name, format!("must be positive, got {value}"));
            }
        }
        if plate.width >= 2.0 * m.radius {
            fail(
                "mesh.fixateur.width",
                format!("{} does not fit the diameter {}", plate.width, 2.0 * m.radius),
            );
        }
    }
    report
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration:\n{0}")]
    Invalid(ValidationReport<ScenarioViolation>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    length: Option<f64>,
    radius: Option<f64>,
    target_edge: Option<f64>,
    /// `false` removes the plate, `true` adds the default plate.
    fixateur: Option<bool>,
    plate: Option<FixateurSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Preset,
    name: Option<String>,
    molecule_dirichlet: Option<f64>,
    initial_molecules: Option<f64>,
    output_every: Option<usize>,
    mesh: Option<RawMesh>,
    parameters: Option<ParameterSet>,
}

/// Parses configuration text; see the module docs for the layout.
pub fn parse_config(text: &str) -> Result<(Scenario, ParameterSet), ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut scenario = Scenario::preset(raw.preset);
    if let Some(name) = raw.name {
        scenario.name = name;
    }
    if let Some(v) = raw.molecule_dirichlet {
        scenario.molecule_dirichlet = v;
    }
    if let Some(v) = raw.initial_molecules {
        scenario.initial_molecules = v;
    }
    if let Some(v) = raw.output_every {
        scenario.output_every = v;
    }
    if let Some(mesh) = raw.mesh {
        let spec = &mut scenario.mesh;
        spec.length = mesh.length.unwrap_or(spec.length);
        spec.radius = mesh.radius.unwrap_or(spec.radius);
        spec.target_edge = mesh.target_edge.unwrap_or(spec.target_edge);
        match mesh.fixateur {
            Some(false) => spec.fixateur = None,
            Some(true) if spec.fixateur.is_none() => spec.fixateur = Some(FixateurSpec::default()),
            _ => {}
        }
        if let Some(plate) = mesh.plate {
            if spec.fixateur.is_none() {
                return Err(ConfigError::Parse(
                    "mesh.plate given but the scenario has no fixateur".to_string(),
                ));
            }
            spec.fixateur = Some(plate);
        }
    }
    let traction_given = text
        .parse::<toml::Table>()
        .ok()
        .and_then(|t| t.get("parameters")?.as_table()?.get("traction").cloned())
        .is_some();
    let mut params = raw.parameters.unwrap_or_default();
    if traction_given {
        scenario.traction = params.traction;
    } else {
        params.traction = scenario.traction;
    }
    let report = validate_scenario(&scenario, &params);
    if !report.is_empty() {
        return Err(ConfigError::Invalid(report));
    }
    Ok((scenario, params))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<(Scenario, ParameterSet), ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Fully explicit configuration text that reloads to the same scenario and parameters.
pub fn dump_config(scenario: &Scenario, params: &ParameterSet) -> String {
    let raw = RawConfig {
        preset: scenario.preset,
        name: Some(scenario.name.clone()),
        molecule_dirichlet: Some(scenario.molecule_dirichlet),
        initial_molecules: Some(scenario.initial_molecules),
        output_every: Some(scenario.output_every),
        mesh: Some(RawMesh {
            length: Some(scenario.mesh.length),
            radius: Some(scenario.mesh.radius),
            target_edge: Some(scenario.mesh.target_edge),
            fixateur: Some(scenario.mesh.fixateur.is_some()),
            plate: scenario.mesh.fixateur,
        }),
        parameters: Some(params.clone()),
    };
    toml::to_string(&raw).expect("configuration serialises")
}
