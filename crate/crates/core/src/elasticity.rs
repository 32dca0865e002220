//! Quasi-static linear elasticity with P1 tetrahedra.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::fields::{strain_norm_delta, DeltaMode, ElasticTensorSpec, FieldError, Lame};
use crate::mesh::{ElasticRole, Mesh, Point, Region};
use crate::sparse::{
    solve_cg, CgOptions, Constraints, NullSpace, Reduction, SolveError, SparseMatrix,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElasticityError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("bone density {b} at node {node} exceeds the pore capacity {capacity}")]
    Inadmissible { node: usize, b: f64, capacity: f64 },
    #[error("expected {expected} element materials, got {got}")]
    MaterialCount { expected: usize, got: usize },
    #[error("degenerate tetrahedron {0}")]
    Degenerate(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Volume and barycentric-coordinate gradients of a linear tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct P1Tet {
    pub volume: f64,
    pub grads: [Vector3<f64>; 4],
}

impl P1Tet {
    pub fn new(p: [Point; 4]) -> Option<Self> {
        let v = |i: usize| Vector3::new(p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]);
        let jac = Matrix3::from_columns(&[v(1), v(2), v(3)]);
        let det = jac.determinant();
        let inv = jac.try_inverse()?;
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        Some(Self {
            volume: det.abs() / 6.0,
            grads: [-(g1 + g2 + g3), g1, g2, g3],
        })
    }
}

pub fn tet_geometry(mesh: &Mesh) -> Result<Vec<P1Tet>, ElasticityError> {
    (0..mesh.tet_count())
        .map(|t| P1Tet::new(mesh.tet_points(t)).ok_or(ElasticityError::Degenerate(t)))
        .collect()
}

/// 12×12 element stiffness, unknowns ordered node-major (`3·a + i`).
pub fn element_stiffness(tet: &P1Tet, lame: Lame) -> [[f64; 12]; 12] {
    let mut k = [[0.0; 12]; 12];
    let g = &tet.grads;
    for a in 0..4 {
        for b in 0..4 {
            let gg = g[a].dot(&g[b]);
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = lame.lambda * g[a][i] * g[b][j] + lame.mu * g[a][j] * g[b][i];
                    if i == j {
                        v += lame.mu * gg;
                    }
                    k[3 * a + i][3 * b + j] = tet.volume * v;
                }
            }
        }
    }
    k
}

/// Per-element Lamé pairs from the element-averaged density and bone fraction.
pub fn element_materials(
    mesh: &Mesh,
    rho: &[f64],
    sigma: f64,
    b: &[f64],
    tensors: &ElasticTensorSpec,
) -> Result<Vec<Lame>, ElasticityError> {
    let plate_only = mesh.fixateur_only_nodes();
    for node in 0..mesh.node_count() {
        if plate_only[node] {
            continue;
        }
        let capacity = 1.0 - rho[node];
        if b[node] > capacity + 1e-12 || b[node] < 0.0 {
            return Err(ElasticityError::Inadmissible {
                node,
                b: b[node],
                capacity,
            });
        }
    }
    Ok(mesh
        .tets
        .iter()
        .zip(&mesh.regions)
        .map(|(tet, &region)| {
            let rho_mean = tet.iter().map(|&n| rho[n]).sum::<f64>() / 4.0;
            let b_mean = tet.iter().map(|&n| b[n]).sum::<f64>() / 4.0;
            tensors.effective(region, rho_mean, sigma, b_mean)
        })
        .collect())
}

pub fn assemble_elasticity(
    mesh: &Mesh,
    geometry: &[P1Tet],
    materials: &[Lame],
) -> Result<SparseMatrix, ElasticityError> {
    if materials.len() != mesh.tet_count() {
        return Err(ElasticityError::MaterialCount {
            expected: mesh.tet_count(),
            got: materials.len(),
        });
    }
    let mut triplets = Vec::with_capacity(mesh.tet_count() * 144);
    for ((tet, geo), &lame) in mesh.tets.iter().zip(geometry).zip(materials) {
        let ke = element_stiffness(geo, lame);
        for a in 0..4 {
            for i in 0..3 {
                let row = 3 * tet[a] + i;
                for b in 0..4 {
                    for j in 0..3 {
                        triplets.push((row, 3 * tet[b] + j, ke[3 * a + i][3 * b + j]));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(3 * mesh.node_count(), &triplets))
}

/// Consistent P1 load of a downward axial traction on the loaded cap.
pub fn traction_load(mesh: &Mesh, traction: f64) -> Vec<f64> {
    let mut load = vec![0.0; 3 * mesh.node_count()];
    for (i, tri) in mesh.boundary.iter().enumerate() {
        if tri.tag.elastic != ElasticRole::NeumannLoaded {
            continue;
        }
        let share = mesh.tri_area(i) / 3.0;
        for &n in &tri.nodes {
            load[3 * n + 2] -= traction * share;
        }
    }
    load
}

/// All three components fixed to `value` on elastic Dirichlet nodes.
pub fn dirichlet_constraints(mesh: &Mesh, value: [f64; 3]) -> Constraints {
    mesh.nodes_where(|t| t.elastic == ElasticRole::Dirichlet)
        .into_iter()
        .flat_map(|n| (0..3).map(move |i| (3 * n + i, value[i])))
        .collect()
}

/// Six rigid-body modes (three translations, three linearised rotations).
pub fn rigid_body_modes(mesh: &Mesh) -> NullSpace {
    let n = mesh.node_count();
    let mut centre = [0.0; 3];
    for p in &mesh.nodes {
        for i in 0..3 {
            centre[i] += p[i] / n as f64;
        }
    }
    let mut modes = vec![vec![0.0; 3 * n]; 6];
    for (k, p) in mesh.nodes.iter().enumerate() {
        let [x, y, z] = [p[0] - centre[0], p[1] - centre[1], p[2] - centre[2]];
        for i in 0..3 {
            modes[i][3 * k + i] = 1.0;
        }
        modes[3][3 * k] = -y;
        modes[3][3 * k + 1] = x;
        modes[4][3 * k + 1] = -z;
        modes[4][3 * k + 2] = y;
        modes[5][3 * k] = z;
        modes[5][3 * k + 2] = -x;
    }
    NullSpace::new(modes)
}

/// Boundary-condition treatment of the assembled system.
#[derive(Debug, Clone)]
pub enum ElasticSystem {
    /// Prescribed unknowns eliminated symmetrically.
    Eliminated {
        reduction: Reduction,
        matrix: SparseMatrix,
        rhs: Vec<f64>,
        values: Vec<f64>,
    },
    /// No displacement constraints: solved modulo rigid motions.
    RigidProjected {
        matrix: SparseMatrix,
        rhs: Vec<f64>,
        modes: NullSpace,
    },
}

impl ElasticSystem {
    pub fn with_constraints(
        mesh: &Mesh,
        matrix: &SparseMatrix,
        load: &[f64],
        constraints: &Constraints,
    ) -> Self {
        if constraints.is_empty() {
            return ElasticSystem::RigidProjected {
                matrix: matrix.clone(),
                rhs: load.to_vec(),
                modes: rigid_body_modes(mesh),
            };
        }
        let mut values = vec![0.0; matrix.dim()];
        for (&dof, &v) in constraints {
            values[dof] = v;
        }
        let reduction = Reduction::new(matrix.dim(), constraints.keys().copied());
        let rhs = reduction.rhs(matrix, load, &values);
        ElasticSystem::Eliminated {
            matrix: reduction.matrix(matrix),
            reduction,
            rhs,
            values,
        }
    }

    pub fn is_projected(&self) -> bool {
        matches!(self, ElasticSystem::RigidProjected { .. })
    }

    pub fn unknowns(&self) -> usize {
        match self {
            ElasticSystem::Eliminated { matrix, .. } | ElasticSystem::RigidProjected { matrix, .. } => {
                matrix.dim()
            }
        }
    }
}

/// Traction on loaded faces and the tagged Dirichlet set fixed to `dirichlet_value`.
/// Without any Dirichlet face the system is flagged for the projected solve.
pub fn apply_elastic_bcs(
    matrix: &SparseMatrix,
    mesh: &Mesh,
    traction: f64,
    dirichlet_value: [f64; 3],
) -> (ElasticSystem, Vec<f64>) {
    let load = traction_load(mesh, traction);
    let constraints = dirichlet_constraints(mesh, dirichlet_value);
    (
        ElasticSystem::with_constraints(mesh, matrix, &load, &constraints),
        load,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSolution {
    pub u: Vec<[f64; 3]>,
    pub strain: Vec<Matrix3<f64>>,
    /// Frobenius norm of the element strain.
    pub strain_norm: Vec<f64>,
    pub cg_iterations: usize,
    pub residual: f64,
}

impl DisplacementSolution {
    pub fn zero(mesh: &Mesh) -> Self {
        Self {
            u: vec![[0.0; 3]; mesh.node_count()],
            strain: vec![Matrix3::zeros(); mesh.tet_count()],
            strain_norm: vec![0.0; mesh.tet_count()],
            cg_iterations: 0,
            residual: 0.0,
        }
    }

    pub fn from_displacement(geometry: &[P1Tet], mesh: &Mesh, u: Vec<[f64; 3]>) -> Self {
        let strain = element_strain(mesh, geometry, &u);
        let strain_norm = strain.iter().map(|e| e.norm()).collect();
        Self {
            u,
            strain,
            strain_norm,
            cg_iterations: 0,
            residual: 0.0,
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.u.iter().flatten().copied().collect()
    }
}

/// Symmetrised gradient of the P1 displacement on each element.
pub fn element_strain(mesh: &Mesh, geometry: &[P1Tet], u: &[[f64; 3]]) -> Vec<Matrix3<f64>> {
    mesh.tets
        .iter()
        .zip(geometry)
        .map(|(tet, geo)| {
            let mut grad = Matrix3::zeros();
            for a in 0..4 {
                let ua = Vector3::from(u[tet[a]]);
                grad += ua * geo.grads[a].transpose();
            }
            (grad + grad.transpose()) * 0.5
        })
        .collect()
}

pub fn solve_cg_displacement(
    mesh: &Mesh,
    geometry: &[P1Tet],
    system: &ElasticSystem,
    options: CgOptions,
    guess: Option<&[f64]>,
) -> Result<DisplacementSolution, ElasticityError> {
    let (full, iterations, residual) = match system {
        ElasticSystem::Eliminated {
            reduction,
            matrix,
            rhs,
            values,
        } => {
            let reduced_guess = guess.map(|g| reduction.restrict(g));
            let out = solve_cg(matrix, rhs, reduced_guess.as_deref(), None, options)?;
            (reduction.expand(&out.x, values), out.iterations, out.residual)
        }
        ElasticSystem::RigidProjected { matrix, rhs, modes } => {
            let out = solve_cg(matrix, rhs, guess, Some(modes), options)?;
            (out.x, out.iterations, out.residual)
        }
    };
    let u: Vec<[f64; 3]> = full.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let mut solution = DisplacementSolution::from_displacement(geometry, mesh, u);
    solution.cg_iterations = iterations;
    solution.residual = residual;
    Ok(solution)
}

/// Strain stimulus per element and its volume-weighted nodal average.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub element: Vec<f64>,
    pub nodal: Vec<f64>,
}

pub fn element_strain_stimulus(
    mesh: &Mesh,
    solution: &DisplacementSolution,
    mode: DeltaMode,
) -> Stimulus {
    let element: Vec<f64> = solution
        .strain
        .iter()
        .map(|e| strain_norm_delta(e, mode))
        .collect();
    let mut sum = vec![0.0; mesh.node_count()];
    let mut weight = vec![0.0; mesh.node_count()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        let v = mesh.tet_volume(t);
        for &n in tet {
            sum[n] += v * element[t];
            weight[n] += v;
        }
    }
    let nodal = sum
        .iter()
        .zip(&weight)
        .map(|(s, w)| if *w > 0.0 { s / w } else { 0.0 })
        .collect();
    Stimulus { element, nodal }
}

/// Stored energy `½ ∫ ε : ℂε` (kN·mm).
pub fn strain_energy(geometry: &[P1Tet], strain: &[Matrix3<f64>], materials: &[Lame]) -> f64 {
    geometry
        .iter()
        .zip(strain)
        .zip(materials)
        .map(|((g, e), m)| g.volume * m.energy_density(e))
        .sum()
}

/// Scaffold elements only, for region-restricted post-processing.
pub fn scaffold_elements(mesh: &Mesh) -> impl Iterator<Item = usize> + '_ {
    (0..mesh.tet_count()).filter(|&t| mesh.regions[t] == Region::Scaffold)
}
