//! Pointwise logistic growth of osteoblasts and bone.
//!
//! The driving rate is frozen at the old time level and the logistic factor is
//! taken implicitly, which gives the closed-form update
//! `y⁺ = cap − (cap − y) / (1 + dt·rate/cap)`. It never leaves `[y, cap]`.

use rayon::prelude::*;
use thiserror::Error;

use crate::diffusion::{MoleculeState, POSITIVITY_EPS};
use crate::fields::{h_eval, k_eval, FieldError, ParameterSet, ScaffoldDensity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("rate must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("value {value} outside [0, {cap}]")]
    OutOfRange { value: f64, cap: f64 },
    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<OdeError>,
    },
    #[error("node {node}: molecule {molecule} concentration {value:e} is negative")]
    NegativeConcentration {
        node: usize,
        molecule: usize,
        value: f64,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// One barrier-preserving step of `y' = rate·(1 − y/cap)`.
pub fn logistic_step(y: f64, rate: f64, cap: f64, dt: f64) -> Result<f64, OdeError> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(OdeError::NegativeRate(rate));
    }
    if !(cap > 0.0) {
        return Err(OdeError::NonPositiveCapacity(cap));
    }
    if !(dt > 0.0) {
        return Err(OdeError::InvalidStep(dt));
    }
    if !(y >= 0.0 && y <= cap) {
        return Err(OdeError::OutOfRange { value: y, cap });
    }
    let next = cap - (cap - y) / (1.0 + dt * rate / cap);
    Ok(next.clamp(y, cap))
}

/// Osteoblast and bone volume fractions per node.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueState {
    pub c: Vec<f64>,
    pub b: Vec<f64>,
}

impl TissueState {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            c: vec![0.0; nodes],
            b: vec![0.0; nodes],
        }
    }

    pub fn node_count(&self) -> usize {
        self.c.len()
    }
}

/// Concentrations at a node with solver noise above `−POSITIVITY_EPS` clamped to zero.
fn clamped_molecules(a: &MoleculeState, node: usize) -> Result<Vec<f64>, OdeError> {
    a.a.iter()
        .enumerate()
        .map(|(molecule, field)| {
            let value = field[node];
            if value < -POSITIVITY_EPS || value.is_nan() {
                Err(OdeError::NegativeConcentration {
                    node,
                    molecule,
                    value,
                })
            } else {
                Ok(value.max(0.0))
            }
        })
        .collect()
}

fn at_node(node: usize) -> impl Fn(OdeError) -> OdeError {
    move |e| match e {
        OdeError::NegativeConcentration { .. } | OdeError::Node { .. } => e,
        other => OdeError::Node {
            node,
            source: Box::new(other),
        },
    }
}

/// Which nodes take part in the tissue update (fixateur-only nodes do not).
fn is_frozen(frozen: Option<&[bool]>, node: usize) -> bool {
    frozen.is_some_and(|f| f[node])
}

/// Osteoblast update with `H(a, c, b)` evaluated at the given (old) state.
pub fn cell_step(
    state: &TissueState,
    a: &MoleculeState,
    rho: &ScaffoldDensity,
    params: &ParameterSet,
    dt: f64,
    frozen: Option<&[bool]>,
) -> Result<TissueState, OdeError> {
    let c = (0..state.node_count())
        .into_par_iter()
        .map(|node| {
            if is_frozen(frozen, node) {
                return Ok(state.c[node]);
            }
            let conc = clamped_molecules(a, node)?;
            let rate = h_eval(&conc, state.c[node], state.b[node], params)?;
            logistic_step(state.c[node], rate, rho.capacity(node), dt).map_err(at_node(node))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TissueState {
        c,
        b: state.b.clone(),
    })
}

/// Bone update with `K(a, c, b)` evaluated at the given (old) state.
pub fn bone_step(
    state: &TissueState,
    a: &MoleculeState,
    rho: &ScaffoldDensity,
    params: &ParameterSet,
    dt: f64,
    frozen: Option<&[bool]>,
) -> Result<TissueState, OdeError> {
    let b = (0..state.node_count())
        .into_par_iter()
        .map(|node| {
            if is_frozen(frozen, node) {
                return Ok(state.b[node]);
            }
            let conc = clamped_molecules(a, node)?;
            let rate = k_eval(&conc, state.c[node], state.b[node], params)?;
            logistic_step(state.b[node], rate, rho.capacity(node), dt).map_err(at_node(node))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TissueState {
        c: state.c.clone(),
        b,
    })
}

/// Cell then bone update, both reading the old `c` and `b`.
pub fn tissue_step(
    state: &TissueState,
    a: &MoleculeState,
    rho: &ScaffoldDensity,
    params: &ParameterSet,
    dt: f64,
    frozen: Option<&[bool]>,
) -> Result<TissueState, OdeError> {
    let cells = cell_step(state, a, rho, params, dt, frozen)?;
    let bone = bone_step(state, a, rho, params, dt, frozen)?;
    Ok(TissueState {
        c: cells.c,
        b: bone.b,
    })
}
