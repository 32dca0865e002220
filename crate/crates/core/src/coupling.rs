//! Time loop over elasticity, molecule diffusion and the tissue ODEs, plus a
//! fixed-point mode that iterates the successive-solve map on whole trajectories.

use log::{debug, info};
use thiserror::Error;

use crate::diffusion::{positivity_report, DiffusionError, DiffusionStepper, MoleculeState, POSITIVITY_EPS};
use crate::elasticity::{
    assemble_elasticity, dirichlet_constraints, element_materials, element_strain_stimulus,
    solve_cg_displacement, strain_energy, tet_geometry, traction_load, DisplacementSolution,
    ElasticSystem, ElasticityError, P1Tet, Stimulus,
};
use crate::fields::{sigma, ElasticTensorSpec, FieldError, ParameterSet, ScaffoldDensity};
use crate::mesh::Mesh;
use crate::ode::{bone_step, cell_step, OdeError, TissueState};
use crate::scenario::Scenario;
use crate::sparse::{CgOptions, Constraints};

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("step {step} (t = {t} months): elasticity: {source}")]
    Elasticity {
        step: usize,
        t: f64,
        #[source]
        source: ElasticityError,
    },
    #[error("step {step} (t = {t} months): diffusion: {source}")]
    Diffusion {
        step: usize,
        t: f64,
        #[source]
        source: DiffusionError,
    },
    #[error("step {step} (t = {t} months): tissue update: {source}")]
    Ode {
        step: usize,
        t: f64,
        #[source]
        source: OdeError,
    },
    #[error("step {step} (t = {t} months): invariant violated: {message}")]
    Invariant {
        step: usize,
        t: f64,
        message: String,
    },
    #[error("window {window} must lie in (0, {t_end}]")]
    InvalidWindow { window: f64, t_end: f64 },
    #[error("contraction factor needs at least 3 iterates, got {0}")]
    TooFewIterates(usize),
}

/// Full solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    pub sigma: f64,
    /// Elasticity solved with this state's `b` and `sigma`.
    pub displacement: DisplacementSolution,
    /// `|ε|_δ` per element and its nodal average.
    pub stimulus: Stimulus,
    /// Stored elastic energy (kN·mm).
    pub strain_energy: f64,
    pub molecules: MoleculeState,
    pub tissue: TissueState,
}

/// Solver figures for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub min_a: Vec<f64>,
    pub max_a: Vec<f64>,
    pub max_c: f64,
    pub max_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// States at `t = 0, dt, …, T`.
    pub states: Vec<SimulationState>,
    /// One entry per step taken.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn last(&self) -> &SimulationState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// State closest to time `t`.
    pub fn at_time(&self, t: f64) -> &SimulationState {
        let idx = ((t / self.dt).round().max(0.0) as usize).min(self.states.len() - 1);
        &self.states[idx]
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Precomputed operators for one mesh, parameter set and scenario.
#[derive(Debug, Clone)]
pub struct Model<'m> {
    mesh: &'m Mesh,
    params: ParameterSet,
    geometry: Vec<P1Tet>,
    rho: ScaffoldDensity,
    tensors: ElasticTensorSpec,
    frozen: Vec<bool>,
    load: Vec<f64>,
    constraints: Constraints,
    stepper: DiffusionStepper,
    initial_molecules: f64,
}

impl<'m> Model<'m> {
    pub fn new(mesh: &'m Mesh, params: &ParameterSet, scenario: &Scenario) -> Result<Self, CouplingError> {
        Self::with_step(mesh, params, scenario, params.dt)
    }

    /// Same model with a step other than `params.dt`.
    pub fn with_step(
        mesh: &'m Mesh,
        params: &ParameterSet,
        scenario: &Scenario,
        dt: f64,
    ) -> Result<Self, CouplingError> {
        let setup = |e: &dyn std::fmt::Display| CouplingError::Setup(e.to_string());
        let geometry = tet_geometry(mesh).map_err(|e| setup(&e))?;
        let rho = ScaffoldDensity::uniform(mesh.node_count(), params)?;
        let stepper = DiffusionStepper::new(mesh, rho.values(), params, scenario.molecule_dirichlet, dt)
            .map_err(|e| setup(&e))?;
        let mut params = params.clone();
        params.dt = dt;
        Ok(Self {
            mesh,
            tensors: params.tensors()?,
            geometry,
            rho,
            frozen: mesh.fixateur_only_nodes(),
            load: traction_load(mesh, scenario.traction),
            constraints: dirichlet_constraints(mesh, [0.0; 3]),
            stepper,
            initial_molecules: scenario.initial_molecules,
            params,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn density(&self) -> &ScaffoldDensity {
        &self.rho
    }

    /// Nodes excluded from the tissue update (inside the plate).
    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn stepper(&self) -> &DiffusionStepper {
        &self.stepper
    }

    /// Displacement, stimulus and energy for bone field `b` at time `t`.
    pub fn solve_elasticity(
        &self,
        t: f64,
        b: &[f64],
        guess: Option<&DisplacementSolution>,
    ) -> Result<(DisplacementSolution, Stimulus, f64), ElasticityError> {
        let s = sigma(t, self.params.k1);
        let materials = element_materials(self.mesh, self.rho.values(), s, b, &self.tensors)?;
        let matrix = assemble_elasticity(self.mesh, &self.geometry, &materials)?;
        let system = ElasticSystem::with_constraints(self.mesh, &matrix, &self.load, &self.constraints);
        let options = CgOptions {
            tol: self.params.cg_tol,
            max_iter: self.params.cg_max_iter_for(system.unknowns()),
        };
        let flat = guess.map(|g| g.flat());
        let solution = solve_cg_displacement(self.mesh, &self.geometry, &system, options, flat.as_deref())?;
        let stimulus = element_strain_stimulus(self.mesh, &solution, self.params.delta);
        let energy = strain_energy(&self.geometry, &solution.strain, &materials);
        Ok((solution, stimulus, energy))
    }

    fn state_at(
        &self,
        step: usize,
        t: f64,
        molecules: MoleculeState,
        tissue: TissueState,
        guess: Option<&DisplacementSolution>,
    ) -> Result<SimulationState, CouplingError> {
        let (displacement, stimulus, energy) = self
            .solve_elasticity(t, &tissue.b, guess)
            .map_err(|source| CouplingError::Elasticity { step, t, source })?;
        Ok(SimulationState {
            t,
            sigma: sigma(t, self.params.k1),
            displacement,
            stimulus,
            strain_energy: energy,
            molecules,
            tissue,
        })
    }

    /// State at `t = 0`: no cells, no bone, molecules at their initial value.
    pub fn initial_state(&self) -> Result<SimulationState, CouplingError> {
        let molecules = self.stepper.initial_state(self.initial_molecules);
        self.state_at(0, 0.0, molecules, TissueState::zeros(self.mesh.node_count()), None)
    }

    /// One staggered step from `state`, whose displacement must belong to it.
    pub fn step(&self, step: usize, state: &SimulationState) -> Result<SimulationState, CouplingError> {
        let t = state.t;
        let dt = self.dt();
        let molecules = self
            .stepper
            .step(&state.molecules, &state.stimulus.nodal, &state.tissue.c)
            .map_err(|source| CouplingError::Diffusion { step, t, source })?;
        let ode_err = |source| CouplingError::Ode { step, t, source };
        let frozen = Some(self.frozen.as_slice());
        let cells = cell_step(&state.tissue, &molecules, &self.rho, &self.params, dt, frozen).map_err(ode_err)?;
        let bone = bone_step(&state.tissue, &molecules, &self.rho, &self.params, dt, frozen).map_err(ode_err)?;
        let tissue = TissueState { c: cells.c, b: bone.b };
        let t_next = (step + 1) as f64 * dt;
        let next = self.state_at(step + 1, t_next, molecules, tissue, Some(&state.displacement))?;
        self.check_step(step, state, &next)?;
        Ok(next)
    }

    fn check_step(
        &self,
        step: usize,
        prev: &SimulationState,
        next: &SimulationState,
    ) -> Result<(), CouplingError> {
        let fail = |message: String| CouplingError::Invariant {
            step,
            t: next.t,
            message,
        };
        for node in 0..self.mesh.node_count() {
            let cap = self.rho.capacity(node);
            for (name, old, new) in [
                ("c", prev.tissue.c[node], next.tissue.c[node]),
                ("b", prev.tissue.b[node], next.tissue.b[node]),
            ] {
                if !(new >= 0.0 && new <= cap) {
                    return Err(fail(format!("{name} = {new} at node {node} outside [0, {cap}]")));
                }
                if new < old {
                    return Err(fail(format!("{name} decreased at node {node}: {old} -> {new}")));
                }
            }
        }
        let negative = positivity_report(&next.molecules, next.t);
        if let Some(first) = negative.iter().next() {
            return Err(fail(format!(
                "{} negative concentrations below -{POSITIVITY_EPS:e}, first: {first}",
                negative.len()
            )));
        }
        Ok(())
    }

    fn diagnostics(&self, step: usize, state: &SimulationState) -> StepDiagnostics {
        let (min_a, max_a) = state
            .molecules
            .a
            .iter()
            .map(|f| extrema(f))
            .unzip();
        StepDiagnostics {
            step,
            t: state.t,
            cg_iterations: state.displacement.cg_iterations,
            cg_residual: state.displacement.residual,
            min_a,
            max_a,
            max_c: extrema(&state.tissue.c).1,
            max_b: extrema(&state.tissue.b).1,
        }
    }

    /// Runs the staggered scheme for `steps` steps.
    pub fn run(&self, steps: usize) -> Result<Trajectory, CouplingError> {
        let mut states = Vec::with_capacity(steps + 1);
        let mut diagnostics = Vec::with_capacity(steps);
        states.push(self.initial_state()?);
        for n in 0..steps {
            let next = self.step(n, states.last().expect("non-empty"))?;
            let diag = self.diagnostics(n + 1, &next);
            info!(
                "step {:>4} t={:.4} cg={} a=[{}] c<={:.6} b<={:.6}",
                diag.step,
                diag.t,
                diag.cg_iterations,
                diag.min_a
                    .iter()
                    .zip(&diag.max_a)
                    .map(|(lo, hi)| format!("{lo:.3e}..{hi:.4}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                diag.max_c,
                diag.max_b,
            );
            diagnostics.push(diag);
            states.push(next);
        }
        Ok(Trajectory {
            dt: self.dt(),
            states,
            diagnostics,
        })
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Full staggered simulation over `[0, T]`.
pub fn run_simulation(
    mesh: &Mesh,
    params: &ParameterSet,
    scenario: &Scenario,
) -> Result<Trajectory, CouplingError> {
    let model = Model::new(mesh, params, scenario)?;
    info!(
        "running {} on {} nodes / {} tets, {} steps of {} months",
        scenario.name,
        mesh.node_count(),
        mesh.tet_count(),
        params.step_count(),
        params.dt
    );
    model.run(params.step_count())
}

/// Osteoblast and bone fields at every time level of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueHistory {
    pub levels: Vec<TissueState>,
}

impl TissueHistory {
    pub fn zeros(levels: usize, nodes: usize) -> Self {
        Self {
            levels: vec![TissueState::zeros(nodes); levels],
        }
    }

    pub fn from_trajectory(trajectory: &Trajectory, levels: usize) -> Self {
        Self {
            levels: trajectory.states[..levels]
                .iter()
                .map(|s| s.tissue.clone())
                .collect(),
        }
    }

    /// Max over levels and nodes of the difference in `c` and `b`.
    pub fn distance(&self, other: &TissueHistory) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .flat_map(|(x, y)| {
                let dc = x.c.iter().zip(&y.c).map(|(p, q)| (p - q).abs());
                let db = x.b.iter().zip(&y.b).map(|(p, q)| (p - q).abs());
                dc.chain(db)
            })
            .fold(0.0, f64::max)
    }
}

impl Model<'_> {
    /// The successive-solve map on a window of `levels − 1` steps.
    ///
    /// Given input histories of `c` and `b`, it solves elasticity with the input
    /// `b`, diffusion with the input `c` as source, the cell equation with the input
    /// `b`, and finally the bone equation with the new `c`. Inputs are read at the
    /// end of each step.
    pub fn apply_iteration(&self, input: &TissueHistory) -> Result<(TissueHistory, SimulationState), CouplingError> {
        let levels = input.levels.len();
        let dt = self.dt();
        let frozen = Some(self.frozen.as_slice());
        let mut out = vec![TissueState::zeros(self.mesh.node_count())];
        let mut molecules = self.stepper.initial_state(self.initial_molecules);
        let mut displacement: Option<DisplacementSolution> = None;
        let mut last = None;
        for n in 0..levels - 1 {
            let t = (n + 1) as f64 * dt;
            let data = &input.levels[n + 1];
            let (u, stimulus, energy) = self
                .solve_elasticity(t, &data.b, displacement.as_ref())
                .map_err(|source| CouplingError::Elasticity { step: n, t, source })?;
            molecules = self
                .stepper
                .step(&molecules, &stimulus.nodal, &data.c)
                .map_err(|source| CouplingError::Diffusion { step: n, t, source })?;
            let ode_err = |source| CouplingError::Ode { step: n, t, source };
            let prev = &out[n];
            let cells = cell_step(
                &TissueState { c: prev.c.clone(), b: data.b.clone() },
                &molecules,
                &self.rho,
                &self.params,
                dt,
                frozen,
            )
            .map_err(ode_err)?;
            let bone = bone_step(
                &TissueState { c: cells.c.clone(), b: prev.b.clone() },
                &molecules,
                &self.rho,
                &self.params,
                dt,
                frozen,
            )
            .map_err(ode_err)?;
            let tissue = TissueState { c: cells.c, b: bone.b };
            last = Some((t, u.clone(), stimulus, energy));
            displacement = Some(u);
            out.push(tissue);
        }
        let (t, displacement, stimulus, energy) = last.expect("window holds at least one step");
        let state = SimulationState {
            t,
            sigma: sigma(t, self.params.k1),
            displacement,
            stimulus,
            strain_energy: energy,
            molecules,
            tissue: out[levels - 1].clone(),
        };
        Ok((TissueHistory { levels: out }, state))
    }

    /// Number of time levels (including `t = 0`) covering `window` months.
    pub fn window_levels(&self, window: f64) -> usize {
        (window / self.dt() - 1e-9).ceil().max(1.0) as usize + 1
    }
}

/// Convergence record of the fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// `d_k`, distance between iterate `k` and `k − 1`.
    pub iterates: Vec<f64>,
    /// `d_{k+1} / d_k`.
    pub contraction_factors: Vec<f64>,
    pub converged: bool,
    pub window: f64,
}

/// Fixed-point iteration over `[0, window]` starting from `c = b = 0`.
///
/// The window is split into steps of at most `params.dt`.
pub fn picard_iterate(
    mesh: &Mesh,
    params: &ParameterSet,
    scenario: &Scenario,
    window: f64,
    max_iter: usize,
) -> Result<(SimulationState, PicardReport), CouplingError> {
    if !(window > 0.0 && window <= params.t_end) {
        return Err(CouplingError::InvalidWindow {
            window,
            t_end: params.t_end,
        });
    }
    let steps = (window / params.dt - 1e-9).ceil().max(1.0) as usize;
    let model = Model::with_step(mesh, params, scenario, window / steps as f64)?;
    let mut current = TissueHistory::zeros(steps + 1, mesh.node_count());
    let mut iterates = Vec::new();
    let mut state = None;
    for k in 0..max_iter.max(1) {
        let (next, end) = model.apply_iteration(&current)?;
        let d = next.distance(&current);
        debug!("picard iteration {} distance {d:e}", k + 1);
        iterates.push(d);
        current = next;
        state = Some(end);
        if d <= params.picard_tol {
            break;
        }
    }
    let contraction_factors = iterates.windows(2).map(|w| w[1] / w[0]).collect();
    let converged = iterates.last().is_some_and(|d| *d <= params.picard_tol);
    info!(
        "picard window {window} months: {} iterations, final distance {:e}, converged {converged}",
        iterates.len(),
        iterates.last().copied().unwrap_or(f64::NAN)
    );
    Ok((
        state.expect("at least one iteration"),
        PicardReport {
            iterates,
            contraction_factors,
            converged,
            window,
        },
    ))
}

/// Geometric mean of the last half of the successive distance ratios.
pub fn contraction_factor(report: &PicardReport) -> Result<f64, CouplingError> {
    let d = &report.iterates;
    if d.len() >= 2 && d[1..].contains(&0.0) {
        return Ok(0.0);
    }
    if d.len() < 3 {
        return Err(CouplingError::TooFewIterates(d.len()));
    }
    let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() / 2..];
    let log_mean = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
    Ok(log_mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cylinder_mesh;
    use crate::scenario::{Preset, Scenario};

    fn report(iterates: Vec<f64>) -> PicardReport {
        PicardReport {
            contraction_factors: iterates.windows(2).map(|w| w[1] / w[0]).collect(),
            converged: false,
            iterates,
            window: 1.0,
        }
    }

    #[test]
    fn contraction_factor_examples() {
        assert!((contraction_factor(&report(vec![1.0, 0.5, 0.25, 0.125])).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(contraction_factor(&report(vec![1.0, 0.0])).unwrap(), 0.0);
        assert!(contraction_factor(&report(vec![1.0, 2.0, 4.0])).unwrap() > 1.0);
        assert!(matches!(
            contraction_factor(&report(vec![1.0, 0.5])),
            Err(CouplingError::TooFewIterates(2))
        ));
    }

    fn coarse() -> (Mesh, ParameterSet, Scenario) {
        let mesh = build_cylinder_mesh(30.0, 10.0, 5.0, None).unwrap();
        let scenario = Scenario::preset(Preset::NoFixateur);
        let params = ParameterSet {
            traction: scenario.traction,
            t_end: 1.0,
            ..ParameterSet::default()
        };
        (mesh, params, scenario)
    }

    #[test]
    fn zero_boundary_value_keeps_tissue_empty() {
        let (mesh, mut params, mut scenario) = coarse();
        scenario.traction = 0.0;
        scenario.molecule_dirichlet = 0.0;
        params.traction = 0.0;
        params.t_end = 0.5;
        let traj = run_simulation(&mesh, &params, &scenario).unwrap();
        assert_eq!(traj.states.len(), 5);
        for s in &traj.states {
            assert!(s.tissue.c.iter().all(|v| *v == 0.0));
            assert!(s.tissue.b.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn run_is_monotone_and_deterministic() {
        let (mesh, params, scenario) = coarse();
        let first = run_simulation(&mesh, &params, &scenario).unwrap();
        let second = run_simulation(&mesh, &params, &scenario).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.states.len(), params.step_count() + 1);
        for pair in first.states.windows(2) {
            assert!(pair[1].t > pair[0].t);
            for n in 0..mesh.node_count() {
                assert!(pair[1].tissue.b[n] >= pair[0].tissue.b[n]);
                assert!(pair[1].tissue.c[n] >= pair[0].tissue.c[n]);
            }
        }
        let last = first.last();
        assert!((last.sigma - (-0.1f64).exp()).abs() < 1e-15);
        assert!(last.tissue.c.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn picard_on_staggered_trajectory_moves_by_order_dt() {
        let (mesh, params, scenario) = coarse();
        let window = 0.5;
        let residual = |dt: f64| {
            let p = ParameterSet { dt, t_end: window, lumped_mass: true, ..params.clone() };
            let model = Model::new(&mesh, &p, &scenario).unwrap();
            let traj = model.run(p.step_count()).unwrap();
            let history = TissueHistory::from_trajectory(&traj, traj.states.len());
            let (image, _) = model.apply_iteration(&history).unwrap();
            image.distance(&history)
        };
        let coarse_residual = residual(0.125);
        let fine_residual = residual(0.0625);
        assert!(fine_residual < 0.75 * coarse_residual, "{coarse_residual} {fine_residual}");
    }

    #[test]
    fn picard_iterates_stay_admissible() {
        let (mesh, params, scenario) = coarse();
        let (state, report) = picard_iterate(&mesh, &params, &scenario, 0.25, 20).unwrap();
        assert!(report.converged, "{report:?}");
        assert!((state.t - 0.25).abs() < 1e-12);
        for (c, b) in state.tissue.c.iter().zip(&state.tissue.b) {
            assert!(*c >= 0.0 && *c <= 0.87 && *b >= 0.0 && *b <= 0.87);
        }
        assert!(picard_iterate(&mesh, &params, &scenario, 5.0, 3).is_err());
    }
}
