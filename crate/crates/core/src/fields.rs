//! Model parameters and constitutive relationships.
//!
//! Units throughout: GPa, mm, months. With these, one GPa·mm² is a kN, so the
//! tabulated constants are used verbatim.

use std::fmt;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Region;
use crate::report::ValidationReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("Young's modulus must be positive, got {0}")]
    NonPositiveModulus(f64),
    #[error("Poisson ratio must lie in (-1, 0.5), got {0}")]
    InvalidPoissonRatio(f64),
    #[error("strain is not symmetric (max asymmetry {0:e})")]
    NonSymmetricStrain(f64),
    #[error("expected {expected} molecule concentrations, got {got}")]
    MoleculeCount { expected: usize, got: usize },
    #[error("scaffold density {value} at node {node} outside [{lo}, {hi}]")]
    DensityOutOfBounds {
        node: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Strain measure fed into the molecule source term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DeltaMode {
    /// Plain Frobenius norm.
    #[default]
    Euclidean,
    /// Frobenius norm capped at `max`.
    Truncated { max: f64 },
}

/// Functional form of the bone formation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KForm {
    /// `k4 · a1 · c`
    #[default]
    Simple,
    /// `f1(b)·a1·c + f2(b)·a2·c` with `f1 = max(0, 1 − b/b*)`, `f2 = min(1, b/b*)`.
    Staged { breakpoint: f64 },
}

impl KForm {
    /// Highest number of molecule concentrations multiplied in one term.
    pub fn molecule_degree(&self) -> usize {
        1
    }

    pub fn molecules_required(&self) -> usize {
        match self {
            KForm::Simple => 1,
            KForm::Staged { .. } => 2,
        }
    }
}

/// Molecule degree of the osteoblast generation rate `k6·a1·a2·(1 + k7·c)`.
pub const H_MOLECULE_DEGREE: usize = 2;
/// Molecule count the osteoblast generation rate is written for.
pub const H_MOLECULES: usize = 2;

/// Every model constant plus the discretisation controls.
///
/// Omitted keys fall back to the calibrated defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterSet {
    /// Regeneration period T (months).
    pub t_end: f64,
    /// Scaffold molecular-mass decay rate k1 (1/month).
    pub k1: f64,
    /// Molecule generation rates k2,i (1/month), one per molecule.
    pub k2: Vec<f64>,
    /// Molecule decay rates k3,i (1/month), one per molecule.
    pub k3: Vec<f64>,
    /// Bone regeneration constant k4 (1/month).
    pub k4: f64,
    /// Molecule diffusivity without scaffold k5 (mm²/month).
    pub k5: f64,
    /// Osteoblast generation constant k6 (1/month).
    pub k6: f64,
    /// Osteoblast proliferation constant k7.
    pub k7: f64,
    /// Healthy bone Young's modulus (GPa).
    pub e_bone: f64,
    pub nu_bone: f64,
    /// Intact scaffold (PCL) Young's modulus (GPa).
    pub e_scaffold: f64,
    pub nu_scaffold: f64,
    /// Fixateur plate Young's modulus (GPa).
    pub e_fixateur: f64,
    pub nu_fixateur: f64,
    /// Axial compressive traction on the loaded cap (GPa).
    pub traction: f64,
    /// Spatially constant scaffold volume fraction.
    pub rho: f64,
    /// Lower admissibility bound for the scaffold volume fraction.
    pub rho_min: f64,
    /// Upper admissibility bound for the scaffold volume fraction.
    pub rho_max: f64,
    /// Time step (months).
    pub dt: f64,
    /// Fixed-point iteration tolerance (max norm).
    pub picard_tol: f64,
    /// Relative residual tolerance of the conjugate gradient solver.
    pub cg_tol: f64,
    /// Iteration cap for conjugate gradients; defaults to 20·sqrt(unknowns).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_max_iter: Option<usize>,
    /// Use a lumped molecule mass matrix instead of the consistent one.
    pub lumped_mass: bool,
    pub delta: DeltaMode,
    pub k_form: KForm,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self {
            t_end: 12.0,
            k1: 0.1,
            k2: vec![10500.0, 5250.0],
            k3: vec![16.0, 8.0],
            k4: 0.2,
            k5: 260.0,
            k6: 0.5,
            k7: 0.07,
            e_bone: 5.0,
            nu_bone: 0.3,
            e_scaffold: 0.5,
            nu_scaffold: 0.46,
            e_fixateur: 100.0,
            nu_fixateur: 0.31,
            traction: 0.001,
            rho: 0.13,
            rho_min: 0.01,
            rho_max: 0.95,
            dt: 0.125,
            picard_tol: 1e-8,
            cg_tol: 1e-9,
            cg_max_iter: None,
            lumped_mass: false,
            delta: DeltaMode::Euclidean,
            k_form: KForm::Simple,
        }
    }
}

impl ParameterSet {
    pub fn molecule_count(&self) -> usize {
        self.k2.len()
    }

    pub fn step_count(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil() as usize
    }

    pub fn tensors(&self) -> Result<ElasticTensorSpec, FieldError> {
        Ok(ElasticTensorSpec {
            bone: lame_from_e_nu(self.e_bone, self.nu_bone)?,
            scaffold: lame_from_e_nu(self.e_scaffold, self.nu_scaffold)?,
            fixateur: lame_from_e_nu(self.e_fixateur, self.nu_fixateur)?,
        })
    }

    pub fn cg_max_iter_for(&self, unknowns: usize) -> usize {
        self.cg_max_iter
            .unwrap_or_else(|| (20.0 * (unknowns as f64).sqrt()).ceil() as usize)
            .max(10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub fn validate_parameters(p: &ParameterSet) -> ValidationReport<ParamViolation> {
    let mut report = ValidationReport::new();
    let mut fail = |field: &'static str, message: String| {
        report.push(ParamViolation { field, message })
    };

    if !(0.0 < p.rho_min && p.rho_min <= p.rho && p.rho <= p.rho_max && p.rho_max < 1.0) {
        fail(
            "rho",
            format!(
                "need 0 < rho_min <= rho <= rho_max < 1, got {} <= {} <= {}",
                p.rho_min, p.rho, p.rho_max
            ),
        );
    }
    for (name, v) in [
        ("k1", p.k1),
        ("k4", p.k4),
        ("k5", p.k5),
        ("k6", p.k6),
        ("k7", p.k7),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            fail(name, format!("rate constant must be non-negative, got {v}"));
        }
    }
    for (name, rates) in [("k2", &p.k2), ("k3", &p.k3)] {
        if let Some(v) = rates.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            fail(name, format!("rate constants must be non-negative, got {v}"));
        }
    }
    if p.k2.len() != p.k3.len() {
        fail(
            "k3",
            format!(
                "{} generation rates but {} decay rates",
                p.k2.len(),
                p.k3.len()
            ),
        );
    }
    if p.k2.len() != H_MOLECULES {
        fail(
            "k2",
            format!(
                "osteoblast generation rate needs exactly {H_MOLECULES} molecules, got {}",
                p.k2.len()
            ),
        );
    }
    if p.k_form.molecules_required() > p.k2.len() {
        fail(
            "k_form",
            format!(
                "bone formation rate needs {} molecules, got {}",
                p.k_form.molecules_required(),
                p.k2.len()
            ),
        );
    }
    if H_MOLECULE_DEGREE > 2 || p.k_form.molecule_degree() > 2 {
        fail(
            "k_form",
            "rate laws may multiply at most two molecule concentrations".into(),
        );
    }
    if let KForm::Staged { breakpoint } = p.k_form {
        if !(breakpoint > 0.0) {
            fail(
                "k_form",
                format!("breakpoint must be positive, got {breakpoint}"),
            );
        }
    }
    if !(p.t_end > 0.0) || !p.t_end.is_finite() {
        fail("t_end", format!("must be positive, got {}", p.t_end));
    }
    if !(p.dt > 0.0) || !p.dt.is_finite() {
        fail("dt", format!("must be positive, got {}", p.dt));
    } else if p.dt > p.t_end {
        fail("dt", format!("{} exceeds t_end {}", p.dt, p.t_end));
    }
    for (name, e, nu) in [
        ("e_bone", p.e_bone, p.nu_bone),
        ("e_scaffold", p.e_scaffold, p.nu_scaffold),
        ("e_fixateur", p.e_fixateur, p.nu_fixateur),
    ] {
        if let Err(err) = lame_from_e_nu(e, nu) {
            fail(name, err.to_string());
        }
    }
    if !(p.traction >= 0.0) || !p.traction.is_finite() {
        fail(
            "traction",
            format!("must be a non-negative magnitude, got {}", p.traction),
        );
    }
    if !(p.picard_tol > 0.0) {
        fail("picard_tol", format!("must be positive, got {}", p.picard_tol));
    }
    if !(p.cg_tol > 0.0 && p.cg_tol < 1.0) {
        fail("cg_tol", format!("must lie in (0, 1), got {}", p.cg_tol));
    }
    if p.cg_max_iter == Some(0) {
        fail("cg_max_iter", "must be positive".into());
    }
    if let DeltaMode::Truncated { max } = p.delta {
        if !(max > 0.0) {
            fail("delta", format!("truncation level must be positive, got {max}"));
        }
    }
    report
}

/// Lamé pair of an isotropic material (GPa).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lame {
    pub lambda: f64,
    pub mu: f64,
}

impl Lame {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self { lambda, mu }
    }

    pub fn scaled(self, w: f64) -> Self {
        Self::new(w * self.lambda, w * self.mu)
    }

    /// `λ tr(ε) I + 2μ ε`
    pub fn stress(self, strain: &Matrix3<f64>) -> Matrix3<f64> {
        Matrix3::identity() * (self.lambda * strain.trace()) + strain * (2.0 * self.mu)
    }

    /// `½ ε : ℂε`
    pub fn energy_density(self, strain: &Matrix3<f64>) -> f64 {
        0.5 * self.lambda * strain.trace().powi(2) + self.mu * strain.component_mul(strain).sum()
    }
}

impl std::ops::Add for Lame {
    type Output = Lame;
    fn add(self, rhs: Lame) -> Lame {
        Lame::new(self.lambda + rhs.lambda, self.mu + rhs.mu)
    }
}

pub fn lame_from_e_nu(e: f64, nu: f64) -> Result<Lame, FieldError> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(FieldError::NonPositiveModulus(e));
    }
    if !(nu > -1.0 && nu < 0.5) {
        return Err(FieldError::InvalidPoissonRatio(nu));
    }
    Ok(Lame {
        lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        mu: e / (2.0 * (1.0 + nu)),
    })
}

/// Lamé pairs for bone, intact scaffold and the fixateur.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticTensorSpec {
    pub bone: Lame,
    pub scaffold: Lame,
    pub fixateur: Lame,
}

impl ElasticTensorSpec {
    /// Voigt composite `b·C_b + ρσ·C_ρ` in the scaffold, plain `C_fix` in the plate.
    pub fn effective(&self, region: Region, rho: f64, sigma: f64, b: f64) -> Lame {
        match region {
            Region::Scaffold => self.bone.scaled(b) + self.scaffold.scaled(rho * sigma),
            Region::Fixateur => self.fixateur,
        }
    }
}

/// Remaining fraction of the scaffold's molecular mass, `exp(−k1·t)`.
pub fn sigma(t: f64, k1: f64) -> f64 {
    (-k1 * t).exp()
}

pub fn asymmetry(m: &Matrix3<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

pub fn hooke_apply(
    tensors: &ElasticTensorSpec,
    region: Region,
    rho: f64,
    sigma: f64,
    b: f64,
    strain: &Matrix3<f64>,
) -> Result<Matrix3<f64>, FieldError> {
    let asym = asymmetry(strain);
    if asym > 1e-12 {
        return Err(FieldError::NonSymmetricStrain(asym));
    }
    Ok(tensors.effective(region, rho, sigma, b).stress(strain))
}

/// Isotropic diffusivity `k5·(1 − ρ)` (mm²/month).
pub fn diffusivity(rho: f64, k5: f64) -> f64 {
    k5 * (1.0 - rho)
}

/// Strain stimulus `|ε|_δ`; Lipschitz with constant one in both modes.
pub fn strain_norm_delta(strain: &Matrix3<f64>, mode: DeltaMode) -> f64 {
    let norm = strain.norm();
    match mode {
        DeltaMode::Euclidean => norm,
        DeltaMode::Truncated { max } => norm.min(max),
    }
}

/// Osteoblast generation rate `k6·a1·a2·(1 + k7·c)`.
pub fn h_eval(a: &[f64], c: f64, _b: f64, params: &ParameterSet) -> Result<f64, FieldError> {
    if a.len() != H_MOLECULES {
        return Err(FieldError::MoleculeCount {
            expected: H_MOLECULES,
            got: a.len(),
        });
    }
    Ok(params.k6 * a[0] * a[1] * (1.0 + params.k7 * c))
}

/// Stage weights `(f1, f2)` of the staged bone formation rate.
pub fn stage_weights(b: f64, breakpoint: f64) -> (f64, f64) {
    let s = b / breakpoint;
    ((1.0 - s).max(0.0), s.min(1.0))
}

/// Bone formation rate.
pub fn k_eval(a: &[f64], c: f64, b: f64, params: &ParameterSet) -> Result<f64, FieldError> {
    let needed = params.k_form.molecules_required();
    if a.len() < needed {
        return Err(FieldError::MoleculeCount {
            expected: needed,
            got: a.len(),
        });
    }
    Ok(match params.k_form {
        KForm::Simple => params.k4 * a[0] * c,
        KForm::Staged { breakpoint } => {
            let (f1, f2) = stage_weights(b, breakpoint);
            f1 * a[0] * c + f2 * a[1] * c
        }
    })
}

/// Nodal scaffold volume fraction, checked against the admissibility bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaffoldDensity {
    values: Vec<f64>,
}

impl ScaffoldDensity {
    pub fn new(values: Vec<f64>, lo: f64, hi: f64) -> Result<Self, FieldError> {
        if let Some((node, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= lo && **v <= hi))
        {
            return Err(FieldError::DensityOutOfBounds {
                node,
                value,
                lo,
                hi,
            });
        }
        Ok(Self { values })
    }

    pub fn uniform(nodes: usize, params: &ParameterSet) -> Result<Self, FieldError> {
        Self::new(vec![params.rho; nodes], params.rho_min, params.rho_max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pore volume `1 − ρ` available to cells and bone.
    pub fn capacity(&self, node: usize) -> f64 {
        1.0 - self.values[node]
    }
}
