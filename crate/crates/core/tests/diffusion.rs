mod common;

use ossify::diffusion::{positivity_report, DiffusionStepper, MoleculeState};
use ossify::fields::ParameterSet;
use ossify::mesh::build_cylinder_mesh;

#[test]
fn manufactured_concentration_converges_in_space() {
    let samples: Vec<_> = [8, 16, 32].map(common::diffusion_mms_space).to_vec();
    let orders = common::orders(&samples);
    for order in &orders {
        assert!((order - 2.0).abs() <= 0.3, "{orders:?} from {samples:?}");
    }
}

#[test]
fn manufactured_concentration_converges_in_time() {
    let samples: Vec<_> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| (dt, common::diffusion_mms_time(dt)))
        .collect();
    let orders = common::orders(&samples);
    for order in &orders {
        assert!((order - 1.0).abs() <= 0.3, "{orders:?}");
    }
}

#[test]
fn pure_diffusion_stays_within_unit_interval() {
    let mesh = build_cylinder_mesh(30.0, 10.0, 2.5, None).unwrap();
    let params = ParameterSet::default();
    let rho = vec![params.rho; mesh.node_count()];
    let stepper = DiffusionStepper::new(&mesh, &rho, &params, 1.0, params.dt).unwrap();
    let zero = vec![0.0; mesh.node_count()];
    let mut state = stepper.initial_state(0.0);
    for step in 0..16 {
        let next = stepper.step(&state, &zero, &zero).unwrap();
        for (new, old) in next.a.iter().flatten().zip(state.a.iter().flatten()) {
            assert!(*new >= -1e-8 && *new <= 1.0 + 1e-8, "step {step}: {new}");
            assert!(*new >= old - 1e-12);
        }
        assert!(positivity_report(&next, step as f64).is_empty());
        state = next;
    }
}

#[test]
fn step_operator_is_symmetric() {
    let mesh = build_cylinder_mesh(30.0, 10.0, 5.0, None).unwrap();
    let params = ParameterSet::default();
    let rho = vec![params.rho; mesh.node_count()];
    let stepper = DiffusionStepper::new(&mesh, &rho, &params, 1.0, params.dt).unwrap();
    for i in 0..stepper.molecule_count() {
        let op = stepper.operator(i);
        let scale = op.diagonal().iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(op.max_asymmetry() <= 1e-14 * scale);
    }
    let state = MoleculeState::uniform(2, mesh.node_count(), 0.3);
    let stim = vec![1e-3; mesh.node_count()];
    let c = vec![0.2; mesh.node_count()];
    assert_eq!(stepper.step(&state, &stim, &c).unwrap(), stepper.step(&state, &stim, &c).unwrap());
}
