//! Manufactured solutions and shared fixtures for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Matrix3;
use ossify::diffusion::DiffusionStepper;
use ossify::elasticity::{
    assemble_elasticity, solve_cg_displacement, tet_geometry, traction_load, DisplacementSolution,
    ElasticSystem,
};
use ossify::fields::{lame_from_e_nu, Lame, ParameterSet};
use ossify::mesh::{build_box_mesh, build_cylinder_mesh, Mesh, Point};
use ossify::ode::logistic_step;
use ossify::sparse::CgOptions;

/// Degree-2 rule: barycentric weights of the four points, equal weights V/4.
const QUAD_A: f64 = 0.585_410_196_624_968_5;
const QUAD_B: f64 = 0.138_196_601_125_010_5;

pub fn quad_points() -> [[f64; 4]; 4] {
    let (a, b) = (QUAD_A, QUAD_B);
    [[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]]
}

fn at(p: &[Point; 4], bary: &[f64; 4]) -> Point {
    let mut x = [0.0; 3];
    for (q, w) in p.iter().zip(bary) {
        for d in 0..3 {
            x[d] += w * q[d];
        }
    }
    x
}

/// Observed order from consecutive (h, error) pairs.
pub fn orders(samples: &[(f64, f64)]) -> Vec<f64> {
    samples
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect()
}

pub fn boundary_nodes(mesh: &Mesh) -> Vec<usize> {
    let mut nodes: Vec<usize> = mesh.boundary.iter().flat_map(|t| t.nodes).collect();
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

// ---- elasticity: u = c · sin(πx) sin(πy) sin(πz) on the unit cube ----

const MMS_C: [f64; 3] = [1.0, -0.5, 0.75];

fn sines(x: Point) -> ([f64; 3], [f64; 3]) {
    (x.map(|v| (PI * v).sin()), x.map(|v| (PI * v).cos()))
}

fn mms_u(x: Point) -> [f64; 3] {
    let (s, _) = sines(x);
    let prod = s[0] * s[1] * s[2];
    MMS_C.map(|c| c * prod)
}

/// Gradient and Hessian of the scalar sine product.
fn mms_derivatives(x: Point) -> ([f64; 3], [[f64; 3]; 3]) {
    let (s, c) = sines(x);
    let prod = s[0] * s[1] * s[2];
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        let others: f64 = (0..3).filter(|&k| k != i).map(|k| s[k]).product();
        grad[i] = PI * c[i] * others;
        for j in 0..3 {
            hess[i][j] = if i == j {
                -PI * PI * prod
            } else {
                let k = 3 - i - j;
                PI * PI * c[i] * c[j] * s[k]
            };
        }
    }
    (grad, hess)
}

fn mms_strain(x: Point) -> Matrix3<f64> {
    let (g, _) = mms_derivatives(x);
    Matrix3::from_fn(|i, j| 0.5 * (MMS_C[i] * g[j] + MMS_C[j] * g[i]))
}

fn mms_body_force(x: Point, lame: Lame) -> [f64; 3] {
    let (s, _) = sines(x);
    let prod = s[0] * s[1] * s[2];
    let (_, h) = mms_derivatives(x);
    let mut f = [0.0; 3];
    for i in 0..3 {
        let grad_div: f64 = (0..3).map(|j| MMS_C[j] * h[i][j]).sum();
        f[i] = 3.0 * PI * PI * lame.mu * MMS_C[i] * prod - (lame.lambda + lame.mu) * grad_div;
    }
    f
}

/// Mesh size, L² displacement error and energy-norm error on an n³ cube grid.
pub fn elasticity_mms(n: usize) -> (f64, f64, f64) {
    let lame = Lame::new(2.88, 1.92);
    let mesh = build_box_mesh([1.0; 3], [n; 3]).unwrap();
    let geo = tet_geometry(&mesh).unwrap();
    let k = assemble_elasticity(&mesh, &geo, &vec![lame; mesh.tet_count()]).unwrap();
    let mut load = vec![0.0; 3 * mesh.node_count()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        let p = mesh.tet_points(t);
        let w = geo[t].volume / 4.0;
        for bary in quad_points() {
            let f = mms_body_force(at(&p, &bary), lame);
            for (a, &node) in tet.iter().enumerate() {
                for d in 0..3 {
                    load[3 * node + d] += w * bary[a] * f[d];
                }
            }
        }
    }
    let mut constraints = BTreeMap::new();
    for node in boundary_nodes(&mesh) {
        let u = mms_u(mesh.nodes[node]);
        for d in 0..3 {
            constraints.insert(3 * node + d, u[d]);
        }
    }
    let system = ElasticSystem::with_constraints(&mesh, &k, &load, &constraints);
    let options = CgOptions {
        tol: 1e-12,
        max_iter: 50_000,
    };
    let sol = solve_cg_displacement(&mesh, &geo, &system, options, None).unwrap();
    let (mut l2, mut energy) = (0.0, 0.0);
    for (t, tet) in mesh.tets.iter().enumerate() {
        let p = mesh.tet_points(t);
        let w = geo[t].volume / 4.0;
        for bary in quad_points() {
            let x = at(&p, &bary);
            let exact = mms_u(x);
            for d in 0..3 {
                let uh: f64 = tet.iter().zip(&bary).map(|(&n, b)| b * sol.u[n][d]).sum();
                l2 += w * (uh - exact[d]).powi(2);
            }
            let e = sol.strain[t] - mms_strain(x);
            energy += w * 2.0 * lame.energy_density(&e);
        }
    }
    (1.0 / n as f64, l2.sqrt(), energy.sqrt())
}

// ---- diffusion ----

fn mms_params(k3: f64) -> ParameterSet {
    ParameterSet {
        k5: 1.0,
        k3: vec![k3, k3],
        ..ParameterSet::default()
    }
}

fn l2_nodal_error(mesh: &Mesh, uh: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut sum = 0.0;
    for (t, tet) in mesh.tets.iter().enumerate() {
        let p = mesh.tet_points(t);
        let w = mesh.tet_volume(t) / 4.0;
        for bary in quad_points() {
            let v: f64 = tet.iter().zip(&bary).map(|(&n, b)| b * uh[n]).sum();
            sum += w * (v - exact(at(&p, &bary))).powi(2);
        }
    }
    sum.sqrt()
}

/// Spatial study with `a = 1 + t·cos(πx)cos(πy)cos(πz)`, exact in time under
/// implicit Euler. Lateral faces are no-flux, the z caps carry the exact trace.
pub fn diffusion_mms_space(n: usize) -> (f64, f64) {
    let params = mms_params(1.0);
    let d = params.k5 * (1.0 - params.rho);
    let k3 = params.k3[0];
    let mesh = build_box_mesh([1.0; 3], [n; 3]).unwrap();
    let rho = vec![params.rho; mesh.node_count()];
    let (dt, steps) = (0.1, 5);
    let stepper = DiffusionStepper::new(&mesh, &rho, &params, 1.0, dt).unwrap();
    let q = |x: Point| (PI * x[0]).cos() * (PI * x[1]).cos() * (PI * x[2]).cos();
    let exact = |t: f64, x: Point| 1.0 + t * q(x);
    let source = |t: f64, x: Point| q(x) + d * t * 3.0 * PI * PI * q(x) + k3 * exact(t, x);
    let nodal = |f: &dyn Fn(Point) -> f64| mesh.nodes.iter().map(|&x| f(x)).collect::<Vec<_>>();
    let mut a = nodal(&|x| exact(0.0, x));
    for step in 1..=steps {
        let t = step as f64 * dt;
        a = stepper
            .step_with_source(0, &a, &nodal(&|x| source(t, x)), &nodal(&|x| exact(t, x)))
            .unwrap();
    }
    let t_end = steps as f64 * dt;
    (1.0 / n as f64, l2_nodal_error(&mesh, &a, |x| exact(t_end, x)))
}

/// Temporal study with `a = e^{−t}(1 + z/2)`, which P1 represents exactly in space.
pub fn diffusion_mms_time(dt: f64) -> f64 {
    let params = mms_params(2.0);
    let k3 = params.k3[0];
    let mesh = build_box_mesh([1.0; 3], [2; 3]).unwrap();
    let rho = vec![params.rho; mesh.node_count()];
    let stepper = DiffusionStepper::new(&mesh, &rho, &params, 1.0, dt).unwrap();
    let exact = |t: f64, x: Point| (-t).exp() * (1.0 + 0.5 * x[2]);
    let nodal = |f: &dyn Fn(Point) -> f64| mesh.nodes.iter().map(|&x| f(x)).collect::<Vec<_>>();
    let steps = (1.0 / dt).round() as usize;
    let mut a = nodal(&|x| exact(0.0, x));
    for step in 1..=steps {
        let t = step as f64 * dt;
        let f = nodal(&|x| (k3 - 1.0) * exact(t, x));
        a = stepper.step_with_source(0, &a, &f, &nodal(&|x| exact(t, x))).unwrap();
    }
    mesh.nodes
        .iter()
        .zip(&a)
        .map(|(&x, v)| (v - exact(1.0, x)).abs())
        .fold(0.0, f64::max)
}

// ---- ODE ----

/// Error of the logistic stepper at `t = 1` against `cap·(1 − e^{−rate·t/cap})`.
pub fn logistic_error(steps: usize) -> f64 {
    let (rate, cap) = (1.0, 0.87);
    let dt = 1.0 / steps as f64;
    let mut y = 0.0;
    for _ in 0..steps {
        y = logistic_step(y, rate, cap, dt).unwrap();
    }
    (y - cap * (1.0 - (-rate / cap).exp())).abs()
}

// ---- uniaxial bar ----

/// Displacement of the loaded cylinder with uniform bone stiffness, resting on
/// an axial roller with the minimum in-plane pins.
pub fn uniaxial_patch(edge: f64, traction: f64) -> (Mesh, DisplacementSolution) {
    let mesh = build_cylinder_mesh(30.0, 10.0, edge, None).unwrap();
    let geo = tet_geometry(&mesh).unwrap();
    let lame = lame_from_e_nu(5.0, 0.3).unwrap();
    let k = assemble_elasticity(&mesh, &geo, &vec![lame; mesh.tet_count()]).unwrap();
    let load = traction_load(&mesh, traction);
    let mut constraints = BTreeMap::new();
    for (i, p) in mesh.nodes.iter().enumerate() {
        if p[2].abs() < 1e-9 {
            constraints.insert(3 * i + 2, 0.0);
        }
    }
    let centre = mesh.nearest_node([0.0, 0.0, 0.0]);
    let rim = mesh.nearest_node([10.0, 0.0, 0.0]);
    constraints.insert(3 * centre, 0.0);
    constraints.insert(3 * centre + 1, 0.0);
    constraints.insert(3 * rim + 1, 0.0);
    let system = ElasticSystem::with_constraints(&mesh, &k, &load, &constraints);
    let options = CgOptions {
        tol: 1e-12,
        max_iter: 50_000,
    };
    let sol = solve_cg_displacement(&mesh, &geo, &system, options, None).unwrap();
    (mesh, sol)
}
