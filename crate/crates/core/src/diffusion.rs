//! Reaction–diffusion of the signalling molecules, advanced by implicit Euler.
//!
//! Only scaffold elements carry the diffusion operator; nodes that touch
//! nothing but fixateur elements are inactive and held at zero.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::elasticity::P1Tet;
use crate::fields::{diffusivity, ParameterSet};
use crate::mesh::{DiffusionRole, Mesh, Region};
use crate::report::ValidationReport;
use crate::sparse::{solve_cg, CgOptions, Reduction, SolveError, SparseMatrix};

/// Tolerance below zero that still counts as non-negative.
pub const POSITIVITY_EPS: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("molecule {molecule}: {source}")]
    Solve {
        molecule: usize,
        #[source]
        source: SolveError,
    },
    #[error("{name} has {got} entries, expected {expected}")]
    Length {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{name} is negative ({value}) at node {node}")]
    NegativeInput {
        name: &'static str,
        node: usize,
        value: f64,
    },
    #[error("degenerate tetrahedron {0}")]
    Degenerate(usize),
}

/// Consistent P1 mass matrix and diffusion stiffness with `D = k5·(1 − ρ̄)` per element.
/// Both share one sparsity pattern.
pub fn assemble_diffusion(
    mesh: &Mesh,
    rho: &[f64],
    k5: f64,
) -> Result<(SparseMatrix, SparseMatrix), DiffusionError> {
    let mut mass = Vec::with_capacity(16 * mesh.tet_count());
    let mut stiff = Vec::with_capacity(16 * mesh.tet_count());
    for (t, tet) in mesh.tets.iter().enumerate() {
        if mesh.regions[t] != Region::Scaffold {
            continue;
        }
        let geo = P1Tet::new(mesh.tet_points(t)).ok_or(DiffusionError::Degenerate(t))?;
        let rho_mean = tet.iter().map(|&n| rho[n]).sum::<f64>() / 4.0;
        let d = diffusivity(rho_mean, k5);
        for a in 0..4 {
            for b in 0..4 {
                let m = geo.volume / 20.0 * if a == b { 2.0 } else { 1.0 };
                let k = d * geo.volume * geo.grads[a].dot(&geo.grads[b]);
                mass.push((tet[a], tet[b], m));
                stiff.push((tet[a], tet[b], k));
            }
        }
    }
    let n = mesh.node_count();
    Ok((
        SparseMatrix::from_triplets(n, &mass),
        SparseMatrix::from_triplets(n, &stiff),
    ))
}

/// Row-sum lumping that keeps the sparsity pattern.
fn lump(mass: &SparseMatrix) -> SparseMatrix {
    let sums = mass.row_sums();
    let mut triplets = Vec::with_capacity(mass.nnz());
    for i in 0..mass.dim() {
        for (j, _) in mass.row(i) {
            triplets.push((i, j, if i == j { sums[i] } else { 0.0 }));
        }
    }
    SparseMatrix::from_triplets(mass.dim(), &triplets)
}

/// Molecule concentrations, one nodal field per molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeState {
    pub a: Vec<Vec<f64>>,
}

impl MoleculeState {
    pub fn uniform(molecules: usize, nodes: usize, value: f64) -> Self {
        Self {
            a: vec![vec![value; nodes]; molecules],
        }
    }

    pub fn molecule_count(&self) -> usize {
        self.a.len()
    }

    /// Concentrations of every molecule at `node`.
    pub fn at(&self, node: usize) -> Vec<f64> {
        self.a.iter().map(|f| f[node]).collect()
    }
}

/// Implicit Euler stepper for all molecules at a fixed time step.
///
/// Each step solves `((1 + dt·k3)·M + dt·A) a⁺ = M (a + dt·f)` with the bone
/// adjacent nodes pinned to the Dirichlet value.
#[derive(Debug, Clone)]
pub struct DiffusionStepper {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    reduction: Reduction,
    active: Vec<bool>,
    dirichlet: Vec<usize>,
    boundary_values: Vec<f64>,
    operators: Vec<(SparseMatrix, SparseMatrix)>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    dt: f64,
    cg: CgOptions,
}

impl DiffusionStepper {
    pub fn new(
        mesh: &Mesh,
        rho: &[f64],
        params: &ParameterSet,
        dirichlet_value: f64,
        dt: f64,
    ) -> Result<Self, DiffusionError> {
        if !(dt > 0.0) {
            return Err(DiffusionError::InvalidStep(dt));
        }
        let (consistent, stiffness) = assemble_diffusion(mesh, rho, params.k5)?;
        let mass = if params.lumped_mass {
            lump(&consistent)
        } else {
            consistent
        };
        let n = mesh.node_count();
        let mut active = vec![false; n];
        for (tet, region) in mesh.tets.iter().zip(&mesh.regions) {
            if *region == Region::Scaffold {
                tet.iter().for_each(|&v| active[v] = true);
            }
        }
        let dirichlet: Vec<usize> = mesh
            .nodes_where(|t| t.diffusion == DiffusionRole::DirichletBone)
            .into_iter()
            .filter(|&v| active[v])
            .collect();
        let mut boundary_values = vec![0.0; n];
        for &v in &dirichlet {
            boundary_values[v] = dirichlet_value;
        }
        let inactive = (0..n).filter(|&v| !active[v]);
        let reduction = Reduction::new(n, dirichlet.iter().copied().chain(inactive));
        let operators = params
            .k3
            .iter()
            .map(|&k3| {
                let full = mass.combine(1.0 + dt * k3, &stiffness, dt);
                let reduced = reduction.matrix(&full);
                (full, reduced)
            })
            .collect();
        let unknowns = reduction.free_count().max(1);
        Ok(Self {
            mass,
            stiffness,
            reduction,
            active,
            dirichlet,
            boundary_values,
            operators,
            k2: params.k2.clone(),
            k3: params.k3.clone(),
            dt,
            cg: CgOptions {
                tol: params.cg_tol.min(1e-12),
                max_iter: params.cg_max_iter_for(unknowns),
            },
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn molecule_count(&self) -> usize {
        self.k3.len()
    }

    /// Full step operator of molecule `i`.
    pub fn operator(&self, molecule: usize) -> &SparseMatrix {
        &self.operators[molecule].0
    }

    /// Initial state: `initial` inside, Dirichlet value on bone-adjacent nodes, zero on inactive nodes.
    pub fn initial_state(&self, initial: f64) -> MoleculeState {
        let field: Vec<f64> = (0..self.active.len())
            .map(|v| {
                if !self.active[v] {
                    0.0
                } else if self.reduction.is_fixed(v) {
                    self.boundary_values[v]
                } else {
                    initial
                }
            })
            .collect();
        MoleculeState {
            a: vec![field; self.k3.len()],
        }
    }

    /// One step of molecule `molecule` with an explicit nodal source and
    /// Dirichlet data read from `boundary` at the pinned nodes.
    pub fn step_with_source(
        &self,
        molecule: usize,
        prev: &[f64],
        source: &[f64],
        boundary: &[f64],
    ) -> Result<Vec<f64>, DiffusionError> {
        let n = self.active.len();
        for (name, v) in [("previous field", prev), ("source", source), ("boundary", boundary)] {
            if v.len() != n {
                return Err(DiffusionError::Length {
                    name,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let (full, reduced) = &self.operators[molecule];
        let shifted: Vec<f64> = prev
            .iter()
            .zip(source)
            .map(|(a, f)| a + self.dt * f)
            .collect();
        let load = self.mass.mul(&shifted);
        let mut values = vec![0.0; n];
        for &v in &self.dirichlet {
            values[v] = boundary[v];
        }
        let rhs = self.reduction.rhs(full, &load, &values);
        let guess = self.reduction.restrict(prev);
        let out = solve_cg(reduced, &rhs, Some(&guess), None, self.cg)
            .map_err(|source| DiffusionError::Solve { molecule, source })?;
        Ok(self.reduction.expand(&out.x, &values))
    }

    /// Advances every molecule by one step with source `k2,i · stimulus · c`.
    pub fn step(
        &self,
        state: &MoleculeState,
        stimulus: &[f64],
        c: &[f64],
    ) -> Result<MoleculeState, DiffusionError> {
        let n = self.active.len();
        for (name, field) in [("stimulus", stimulus), ("osteoblast density", c)] {
            if field.len() != n {
                return Err(DiffusionError::Length {
                    name,
                    expected: n,
                    got: field.len(),
                });
            }
            if let Some((node, &value)) = field.iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(DiffusionError::NegativeInput { name, node, value });
            }
        }
        if state.a.len() != self.k3.len() {
            return Err(DiffusionError::Length {
                name: "molecule state",
                expected: self.k3.len(),
                got: state.a.len(),
            });
        }
        let a = (0..self.k3.len())
            .into_par_iter()
            .map(|i| {
                let source: Vec<f64> = (0..n)
                    .map(|v| {
                        if self.active[v] {
                            self.k2[i] * stimulus[v] * c[v]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.step_with_source(i, &state.a[i], &source, &self.boundary_values)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MoleculeState { a })
    }
}

/// Convenience wrapper over [`DiffusionStepper::step`].
pub fn diffusion_step(
    stepper: &DiffusionStepper,
    state: &MoleculeState,
    stimulus: &[f64],
    c: &[f64],
) -> Result<MoleculeState, DiffusionError> {
    stepper.step(state, stimulus, c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeConcentration {
    pub molecule: usize,
    pub node: usize,
    pub value: f64,
    pub t: f64,
}

impl fmt::Display for NegativeConcentration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a{} = {:e} at node {} (t = {} months)",
            self.molecule + 1,
            self.value,
            self.node,
            self.t
        )
    }
}

pub fn positivity_report(state: &MoleculeState, t: f64) -> ValidationReport<NegativeConcentration> {
    state
        .a
        .iter()
        .enumerate()
        .flat_map(|(molecule, field)| {
            field
                .iter()
                .enumerate()
                .filter(|(_, v)| **v < -POSITIVITY_EPS || v.is_nan())
                .map(move |(node, &value)| NegativeConcentration {
                    molecule,
                    node,
                    value,
                    t,
                })
        })
        .collect()
}
