use ossify::coupling::{run_simulation, Model, TissueHistory};
use ossify::fields::ParameterSet;
use ossify::io::{axial_planes, slice_average, timeseries_csv};
use ossify::mesh::{build_cylinder_mesh, FixateurSpec};
use ossify::ode::TissueState;
use ossify::scenario::{Preset, Scenario};
use proptest::prelude::*;

fn short_run(preset: Preset) -> (ossify::mesh::Mesh, ParameterSet, Scenario) {
    let mut scenario = Scenario::preset(preset);
    scenario.mesh.target_edge = 5.0;
    let mesh = scenario.mesh.build().unwrap();
    let params = ParameterSet {
        t_end: 2.0,
        traction: scenario.traction,
        ..ParameterSet::default()
    };
    (mesh, params, scenario)
}

#[test]
fn sigma_follows_decay_and_slices_grow() {
    let (mesh, params, scenario) = short_run(Preset::Fixateur);
    let model = Model::new(&mesh, &params, &scenario).unwrap();
    let traj = model.run(params.step_count()).unwrap();
    let mut previous: Option<Vec<f64>> = None;
    for state in &traj.states {
        assert_eq!(state.sigma, (-params.k1 * state.t).exp());
        let profile = slice_average(state, &mesh, model.density(), axial_planes(&mesh)).unwrap();
        assert!(profile.values.iter().all(|v| *v >= 0.0 && *v <= 1.0 + 1e-8));
        if let Some(prev) = &previous {
            for (new, old) in profile.values.iter().zip(prev) {
                assert!(new >= old);
            }
        }
        previous = Some(profile.values);
    }
    for (node, frozen) in model.frozen().iter().enumerate() {
        if *frozen {
            assert_eq!(traj.last().tissue.b[node], 0.0);
            assert_eq!(traj.last().tissue.c[node], 0.0);
        }
    }
}

#[test]
fn identical_configuration_gives_identical_output() {
    let (mesh, params, scenario) = short_run(Preset::NoFixateur);
    let a = run_simulation(&mesh, &params, &scenario).unwrap();
    let b = run_simulation(&mesh, &params, &scenario).unwrap();
    assert_eq!(a, b);
    assert_eq!(timeseries_csv(&a, &mesh).unwrap(), timeseries_csv(&b, &mesh).unwrap());
}

#[test]
fn plate_shields_the_near_side_at_start() {
    let mesh = build_cylinder_mesh(30.0, 10.0, 2.5, Some(&FixateurSpec::default())).unwrap();
    let scenario = Scenario::preset(Preset::Fixateur);
    let params = ParameterSet::default();
    let model = Model::new(&mesh, &params, &scenario).unwrap();
    let s0 = model.initial_state().unwrap();
    let (lo, hi) = mesh.z_range();
    let mid = |z: f64| (z - lo) > 0.3 * (hi - lo) && (z - lo) < 0.7 * (hi - lo);
    let (mut near, mut far) = ((0.0, 0), (0.0, 0));
    for t in 0..mesh.tet_count() {
        if mesh.regions[t] != ossify::mesh::Region::Scaffold {
            continue;
        }
        let c = mesh.tet_points(t).iter().fold([0.0; 3], |m, p| [m[0] + p[0] / 4.0, m[1] + p[1] / 4.0, m[2] + p[2] / 4.0]);
        if !mid(c[2]) {
            continue;
        }
        let slot = if c[0] > 0.0 { &mut near } else { &mut far };
        slot.0 += s0.stimulus.element[t];
        slot.1 += 1;
    }
    assert!(near.0 / (near.1 as f64) < far.0 / (far.1 as f64));
}

fn admissible_history(levels: usize, nodes: usize, seed: &[f64]) -> TissueHistory {
    let mut hist = TissueHistory::zeros(levels, nodes);
    for (l, level) in hist.levels.iter_mut().enumerate().skip(1) {
        *level = TissueState {
            c: (0..nodes).map(|n| 0.87 * seed[(n + l) % seed.len()]).collect(),
            b: (0..nodes).map(|n| 0.87 * seed[(3 * n + l) % seed.len()]).collect(),
        };
    }
    hist
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn iteration_map_preserves_admissible_set(seed in prop::collection::vec(0.0..=1.0f64, 7..20)) {
        let mut scenario = Scenario::preset(Preset::NoFixateur);
        scenario.mesh.target_edge = 5.0;
        let mesh = scenario.mesh.build().unwrap();
        let params = ParameterSet { traction: scenario.traction, ..ParameterSet::default() };
        let model = Model::new(&mesh, &params, &scenario).unwrap();
        let input = admissible_history(3, mesh.node_count(), &seed);
        let (out, _) = model.apply_iteration(&input).unwrap();
        for level in &out.levels {
            for (c, b) in level.c.iter().zip(&level.b) {
                prop_assert!(*c >= 0.0 && *c <= 0.87);
                prop_assert!(*b >= 0.0 && *b <= 0.87);
            }
        }
    }
}
