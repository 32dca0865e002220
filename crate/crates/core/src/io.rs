//! Result export: legacy VTK grids, time-series CSV and axial slice profiles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::coupling::{SimulationState, Trajectory};
use crate::fields::ScaffoldDensity;
use crate::mesh::{mesh_from_tets, Mesh, Region};

const VTK_TETRA: u8 = 10;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("refusing to write non-finite value in {0}")]
    NonFinite(String),
    #[error("slice {slice} of {count} holds no nodes; use fewer slices")]
    EmptySlice { slice: usize, count: usize },
    #[error("need at least 2 slices, got {0}")]
    TooFewSlices(usize),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("field length {got} does not match {expected} nodes")]
    Length { expected: usize, got: usize },
}

fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_finite(name: &str, values: &[f64]) -> Result<(), IoError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(IoError::NonFinite(name.to_string()))
    }
}

/// Data array attached to points or cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DataArray {
    pub components: usize,
    pub values: Vec<f64>,
}

/// Contents of a legacy unstructured-grid file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkGrid {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_data: BTreeMap<String, DataArray>,
    pub cell_data: BTreeMap<String, DataArray>,
}

impl VtkGrid {
    fn from_mesh(mesh: &Mesh, title: &str) -> Self {
        let mut cell_data = BTreeMap::new();
        cell_data.insert(
            "region".to_string(),
            DataArray {
                components: 1,
                values: mesh.regions.iter().map(|r| r.code() as f64).collect(),
            },
        );
        Self {
            title: title.to_string(),
            points: mesh.nodes.clone(),
            cells: mesh.tets.iter().map(|t| t.to_vec()).collect(),
            cell_types: vec![VTK_TETRA; mesh.tet_count()],
            point_data: BTreeMap::new(),
            cell_data,
        }
    }

    pub fn point_scalar(&self, name: &str) -> Option<&[f64]> {
        self.point_data.get(name).map(|a| a.values.as_slice())
    }

    pub fn cell_scalar(&self, name: &str) -> Option<&[f64]> {
        self.cell_data.get(name).map(|a| a.values.as_slice())
    }

    /// Serialises in the legacy ASCII format; floats use shortest round-trip form.
    pub fn to_legacy_string(&self) -> Result<String, IoError> {
        let mut out = String::new();
        let title = self.title.replace('\n', " ");
        let _ = writeln!(out, "# vtk DataFile Version 3.0");
        let _ = writeln!(out, "{}", if title.is_empty() { "ossify" } else { &title });
        let _ = writeln!(out, "ASCII");
        let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(out, "POINTS {} double", self.points.len());
        for p in &self.points {
            check_finite("POINTS", p)?;
            let _ = writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2]);
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(out, "CELLS {} {}", self.cells.len(), size);
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{} {}", c.len(), ids.join(" "));
        }
        let _ = writeln!(out, "CELL_TYPES {}", self.cell_types.len());
        for t in &self.cell_types {
            let _ = writeln!(out, "{t}");
        }
        write_section(&mut out, "POINT_DATA", self.points.len(), &self.point_data)?;
        write_section(&mut out, "CELL_DATA", self.cells.len(), &self.cell_data)?;
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        write_file(path.as_ref(), &self.to_legacy_string()?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_legacy(&text).map_err(|(line, message)| IoError::Format {
            path: path.display().to_string(),
            line,
            message,
        })
    }
}

fn write_section(
    out: &mut String,
    keyword: &str,
    count: usize,
    arrays: &BTreeMap<String, DataArray>,
) -> Result<(), IoError> {
    if arrays.is_empty() {
        return Ok(());
    }
    let _ = writeln!(out, "{keyword} {count}");
    for (name, array) in arrays {
        check_finite(name, &array.values)?;
        if array.components == 3 {
            let _ = writeln!(out, "VECTORS {name} double");
            for v in array.values.chunks_exact(3) {
                let _ = writeln!(out, "{:e} {:e} {:e}", v[0], v[1], v[2]);
            }
        } else {
            let _ = writeln!(out, "SCALARS {name} double {}", array.components);
            let _ = writeln!(out, "LOOKUP_TABLE default");
            for v in array.values.chunks_exact(array.components) {
                let row: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
    }
    Ok(())
}

/// Whitespace tokens with their line numbers.
struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), (usize, String)> {
        let last = self.items.last().map_or(0, |t| t.0);
        let tok = self
            .items
            .get(self.pos)
            .copied()
            .ok_or((last, "unexpected end of file".to_string()))?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, (usize, String)> {
        let (line, tok) = self.next()?;
        tok.parse()
            .map_err(|_| (line, format!("expected {what}, found {tok:?}")))
    }

    fn expect(&mut self, word: &str) -> Result<(), (usize, String)> {
        let (line, tok) = self.next()?;
        if tok.eq_ignore_ascii_case(word) {
            Ok(())
        } else {
            Err((line, format!("expected {word}, found {tok:?}")))
        }
    }
}

fn parse_legacy(text: &str) -> Result<VtkGrid, (usize, String)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("# vtk DataFile Version") {
        return Err((1, "missing legacy VTK header".to_string()));
    }
    let title = lines.next().unwrap_or_default().to_string();
    let items = text
        .lines()
        .enumerate()
        .skip(2)
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
        .collect();
    let mut tk = Tokens { items, pos: 0 };
    tk.expect("ASCII")?;
    tk.expect("DATASET")?;
    tk.expect("UNSTRUCTURED_GRID")?;
    let mut grid = VtkGrid {
        title,
        ..VtkGrid::default()
    };
    // None until a POINT_DATA or CELL_DATA section opens
    let mut section: Option<(bool, usize)> = None;
    while let Some(word) = tk.peek() {
        let (line, _) = tk.next()?;
        match word.to_ascii_uppercase().as_str() {
            "POINTS" => {
                let n: usize = tk.parse("point count")?;
                tk.next()?;
                grid.points = (0..n)
                    .map(|_| Ok([tk.parse("coordinate")?, tk.parse("coordinate")?, tk.parse("coordinate")?]))
                    .collect::<Result<_, _>>()?;
            }
            "CELLS" => {
                let n: usize = tk.parse("cell count")?;
                let _size: usize = tk.parse("cell list size")?;
                for _ in 0..n {
                    let k: usize = tk.parse("cell size")?;
                    let ids = (0..k)
                        .map(|_| tk.parse::<usize>("node index"))
                        .collect::<Result<Vec<_>, _>>()?;
                    if let Some(bad) = ids.iter().find(|&&i| i >= grid.points.len()) {
                        return Err((line, format!("node index {bad} out of range")));
                    }
                    grid.cells.push(ids);
                }
            }
            "CELL_TYPES" => {
                let n: usize = tk.parse("cell count")?;
                grid.cell_types = (0..n)
                    .map(|_| tk.parse("cell type"))
                    .collect::<Result<_, _>>()?;
            }
            "POINT_DATA" => section = Some((true, tk.parse("point count")?)),
            "CELL_DATA" => section = Some((false, tk.parse("cell count")?)),
            kind @ ("SCALARS" | "VECTORS") => {
                let (on_points, count) =
                    section.ok_or((line, format!("{kind} outside a data section")))?;
                let name = tk.next()?.1.to_string();
                tk.next()?;
                let components = if kind == "VECTORS" {
                    3
                } else {
                    let mut c = 1;
                    if let Some(Ok(v)) = tk.peek().map(str::parse::<usize>) {
                        tk.next()?;
                        c = v;
                    }
                    if tk.peek().is_some_and(|w| w.eq_ignore_ascii_case("LOOKUP_TABLE")) {
                        tk.next()?;
                        tk.next()?;
                    }
                    c
                };
                let values = (0..count * components)
                    .map(|_| tk.parse::<f64>("data value"))
                    .collect::<Result<Vec<_>, _>>()?;
                let array = DataArray { components, values };
                if on_points {
                    grid.point_data.insert(name, array);
                } else {
                    grid.cell_data.insert(name, array);
                }
            }
            other => return Err((line, format!("unsupported keyword {other:?}"))),
        }
    }
    if grid.cell_types.len() != grid.cells.len() {
        return Err((0, "CELL_TYPES count differs from CELLS".to_string()));
    }
    Ok(grid)
}

/// Grid of a simulation state: `u` as vectors, molecules `a1..aN`, `c`, `b`
/// per node, region code and `|ε|_δ` per element.
pub fn state_grid(state: &SimulationState, mesh: &Mesh) -> VtkGrid {
    let mut grid = VtkGrid::from_mesh(mesh, &format!("ossify t_months={:e}", state.t));
    let scalar = |values: &[f64]| DataArray {
        components: 1,
        values: values.to_vec(),
    };
    grid.point_data.insert(
        "u".to_string(),
        DataArray {
            components: 3,
            values: state.displacement.flat(),
        },
    );
    for (i, a) in state.molecules.a.iter().enumerate() {
        grid.point_data.insert(format!("a{}", i + 1), scalar(a));
    }
    grid.point_data.insert("c".to_string(), scalar(&state.tissue.c));
    grid.point_data.insert("b".to_string(), scalar(&state.tissue.b));
    grid.cell_data
        .insert("strain_stimulus".to_string(), scalar(&state.stimulus.element));
    grid
}

pub fn export_vtk(state: &SimulationState, mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    state_grid(state, mesh).write(path)
}

pub fn export_mesh_vtk(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    VtkGrid::from_mesh(mesh, "ossify mesh").write(path)
}

/// Reads tetrahedra and their `region` codes; other cell types are ignored.
/// Boundary faces are recovered and tagged by axial position.
pub fn import_mesh_vtk(path: impl AsRef<Path>) -> Result<Mesh, IoError> {
    let path = path.as_ref();
    let grid = VtkGrid::read(path)?;
    let bad = |message: String| IoError::Format {
        path: path.display().to_string(),
        line: 0,
        message,
    };
    let codes = grid.cell_scalar("region");
    let mut tets = Vec::new();
    let mut regions = Vec::new();
    for (i, (cell, &kind)) in grid.cells.iter().zip(&grid.cell_types).enumerate() {
        if kind != VTK_TETRA {
            continue;
        }
        let region = match codes {
            Some(c) => Region::from_code(c[i] as i32)
                .ok_or_else(|| bad(format!("cell {i}: unknown region code {}", c[i])))?,
            None => Region::Scaffold,
        };
        tets.push([cell[0], cell[1], cell[2], cell[3]]);
        regions.push(region);
    }
    if tets.is_empty() {
        return Err(bad("no tetrahedra".to_string()));
    }
    Ok(mesh_from_tets(grid.points, tets, regions))
}

/// Lumped nodal volume over scaffold elements; zero inside the plate.
pub fn scaffold_node_weights(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.node_count()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        if mesh.regions[t] == Region::Scaffold {
            let v = mesh.tet_volume(t) / 4.0;
            tet.iter().for_each(|&n| w[n] += v);
        }
    }
    w
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

/// Per-slice mean relative bone density `b/(1 − ρ)` along the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProfile {
    pub t: f64,
    /// Slice centres (mm).
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
}

impl SliceProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of distinct axial node planes, the natural slice count of an extruded mesh.
pub fn axial_planes(mesh: &Mesh) -> usize {
    let (lo, hi) = mesh.z_range();
    let tol = 1e-6 * (hi - lo);
    let mut zs: Vec<f64> = mesh.nodes.iter().map(|p| p[2]).collect();
    zs.sort_by(f64::total_cmp);
    zs.dedup_by(|a, b| (*a - *b).abs() <= tol);
    zs.len()
}

/// Volume-weighted mean of `b/(1 − ρ)` over scaffold nodes in `n_slices`
/// equal axial bins.
pub fn slice_average(
    state: &SimulationState,
    mesh: &Mesh,
    rho: &ScaffoldDensity,
    n_slices: usize,
) -> Result<SliceProfile, IoError> {
    if n_slices < 2 {
        return Err(IoError::TooFewSlices(n_slices));
    }
    let b = &state.tissue.b;
    if b.len() != mesh.node_count() {
        return Err(IoError::Length {
            expected: mesh.node_count(),
            got: b.len(),
        });
    }
    let (lo, hi) = mesh.z_range();
    let width = (hi - lo) / n_slices as f64;
    let weights = scaffold_node_weights(mesh);
    let mut sum = vec![0.0; n_slices];
    let mut total = vec![0.0; n_slices];
    for (node, p) in mesh.nodes.iter().enumerate() {
        if weights[node] == 0.0 {
            continue;
        }
        let bin = (((p[2] - lo) / width).floor().max(0.0) as usize).min(n_slices - 1);
        sum[bin] += weights[node] * b[node] / rho.capacity(node);
        total[bin] += weights[node];
    }
    if let Some(slice) = total.iter().position(|w| *w == 0.0) {
        return Err(IoError::EmptySlice {
            slice,
            count: n_slices,
        });
    }
    Ok(SliceProfile {
        t: state.t,
        centers: (0..n_slices).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        values: sum.iter().zip(&total).map(|(s, w)| s / w).collect(),
    })
}

/// `t_months,z_mm,relative_bone_density`, one row per slice.
pub fn slice_csv(profile: &SliceProfile) -> Result<String, IoError> {
    check_finite("slice profile", &profile.values)?;
    let mut out = String::from("t_months,z_mm,relative_bone_density\n");
    for (z, v) in profile.centers.iter().zip(&profile.values) {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", profile.t, z, v);
    }
    Ok(out)
}

pub fn export_slices(profile: &SliceProfile, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_file(path.as_ref(), &slice_csv(profile)?)
}

/// Summary row of one state, in the time-series column order.
pub fn summary_row(state: &SimulationState, weights: &[f64]) -> Vec<f64> {
    let mut row = vec![
        state.t,
        state.sigma,
        weighted_mean(&state.tissue.b, weights),
        state.tissue.b.iter().fold(0.0, |m: f64, v| m.max(*v)),
        weighted_mean(&state.tissue.c, weights),
    ];
    row.extend(state.molecules.a.iter().map(|a| weighted_mean(a, weights)));
    row.push(state.strain_energy);
    row
}

pub fn timeseries_csv(trajectory: &Trajectory, mesh: &Mesh) -> Result<String, IoError> {
    let first = trajectory.states.first().ok_or(IoError::EmptyTrajectory)?;
    let molecules = first.molecules.molecule_count();
    let mut header = vec!["t_months", "sigma", "mean_b", "max_b", "mean_c"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend((1..=molecules).map(|i| format!("mean_a{i}")));
    header.push("total_strain_energy".to_string());
    let mut out = header.join(",");
    out.push('\n');
    let weights = scaffold_node_weights(mesh);
    for state in &trajectory.states {
        let row = summary_row(state, &weights);
        check_finite("time series", &row)?;
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn export_timeseries(trajectory: &Trajectory, mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_file(path.as_ref(), &timeseries_csv(trajectory, mesh)?)
}

/// Parses a CSV written by this module into its header and rows.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(String::from)
        .collect::<Vec<_>>();
    let rows = lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|v| {
                    v.parse::<f64>().map_err(|_| IoError::Format {
                        path: path.display().to_string(),
                        line: i + 2,
                        message: format!("not a number: {v:?}"),
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Model;
    use crate::fields::ParameterSet;
    use crate::mesh::{build_cylinder_mesh, validate_mesh, FixateurSpec};
    use crate::scenario::{Preset, Scenario};

    fn model_state(mesh: &Mesh) -> (SimulationState, ScaffoldDensity) {
        let scenario = Scenario::preset(Preset::Fixateur);
        let params = ParameterSet::default();
        let model = Model::new(mesh, &params, &scenario).unwrap();
        let s0 = model.initial_state().unwrap();
        let s1 = model.step(0, &s0).unwrap();
        (s1, model.density().clone())
    }

    #[test]
    fn vtk_round_trip() {
        let mesh = build_cylinder_mesh(30.0, 10.0, 5.0, Some(&FixateurSpec::default())).unwrap();
        let (state, _) = model_state(&mesh);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.vtk");
        export_vtk(&state, &mesh, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        let grid = VtkGrid::read(&path).unwrap();
        assert_eq!(grid, state_grid(&state, &mesh));
        let b = grid.point_scalar("b").unwrap();
        for (x, y) in b.iter().zip(&state.tissue.b) {
            assert!((x - y).abs() <= 1e-12);
        }
        assert_eq!(grid.point_data["u"].components, 3);
        assert!(grid.point_scalar("a2").is_some());
        assert_eq!(grid.cell_scalar("strain_stimulus").unwrap().len(), mesh.tet_count());
    }

    #[test]
    fn initial_state_exports_zero_bone() {
        let mesh = build_cylinder_mesh(30.0, 10.0, 5.0, None).unwrap();
        let model = Model::new(&mesh, &ParameterSet::default(), &Scenario::preset(Preset::NoFixateur)).unwrap();
        let grid = state_grid(&model.initial_state().unwrap(), &mesh);
        assert!(grid.point_scalar("b").unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mesh_round_trip_keeps_tags() {
        let mesh = build_cylinder_mesh(30.0, 10.0, 5.0, Some(&FixateurSpec::default())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.vtk");
        export_mesh_vtk(&mesh, &path).unwrap();
        let back = import_mesh_vtk(&path).unwrap();
        assert!(validate_mesh(&back).is_empty());
        assert_eq!(back, mesh);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(parse_legacy("hello\n").is_err());
        let text = "# vtk DataFile Version 3.0\nx\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 2 double\n0 0 0\n1 1\n";
        assert!(parse_legacy(text).is_err());
        let text = "# vtk DataFile Version 3.0\nx\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 1 double\n0 0 0\nCELLS 1 5\n4 0 1 2 3\n";
        let err = parse_legacy(text).unwrap_err();
        assert!(err.1.contains("out of range"), "{err:?}");
    }

    #[test]
    fn non_finite_values_refused() {
        let mesh = build_cylinder_mesh(30.0, 10.0, 5.0, None).unwrap();
        let mut grid = VtkGrid::from_mesh(&mesh, "t");
        grid.point_data.insert(
            "bad".into(),
            DataArray {
                components: 1,
                values: vec![f64::NAN; mesh.node_count()],
            },
        );
        assert!(matches!(grid.to_legacy_string(), Err(IoError::NonFinite(_))));
    }

    #[test]
    fn slice_examples() {
        let mesh = build_cylinder_mesh(30.0, 10.0, 2.5, Some(&FixateurSpec::default())).unwrap();
        let (mut state, rho) = model_state(&mesh);
        let n = axial_planes(&mesh);
        assert_eq!(n, 13);
        state.tissue.b = vec![0.0; mesh.node_count()];
        let zero = slice_average(&state, &mesh, &rho, n).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        state.tissue.b = vec![0.5 * 0.87; mesh.node_count()];
        let half = slice_average(&state, &mesh, &rho, n).unwrap();
        assert_eq!(half.len(), 13);
        assert!(half.values.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!((half.centers[0] - 30.0 / 26.0).abs() < 1e-12);
        assert!(matches!(
            slice_average(&state, &mesh, &rho, 1),
            Err(IoError::TooFewSlices(1))
        ));
        assert!(matches!(
            slice_average(&state, &mesh, &rho, 40),
            Err(IoError::EmptySlice { .. })
        ));
    }

    #[test]
    fn csv_outputs() {
        let mesh = build_cylinder_mesh(30.0, 10.0, 5.0, None).unwrap();
        let params = ParameterSet {
            t_end: 0.5,
            ..ParameterSet::default()
        };
        let model = Model::new(&mesh, &params, &Scenario::preset(Preset::NoFixateur)).unwrap();
        let traj = model.run(params.step_count()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        export_timeseries(&traj, &mesh, &path).unwrap();
        let (header, rows) = read_csv(&path).unwrap();
        assert_eq!(
            header.join(","),
            "t_months,sigma,mean_b,max_b,mean_c,mean_a1,mean_a2,total_strain_energy"
        );
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0][0], 0.0);
        assert_eq!(rows[0][1], 1.0);
        assert_eq!(rows[0][2], 0.0);
        for pair in rows.windows(2) {
            assert!(pair[1][2] >= pair[0][2]);
        }
        let profile = slice_average(traj.last(), &mesh, model.density(), axial_planes(&mesh)).unwrap();
        let spath = dir.path().join("slices.csv");
        export_slices(&profile, &spath).unwrap();
        let (sh, srows) = read_csv(&spath).unwrap();
        assert_eq!(sh.join(","), "t_months,z_mm,relative_bone_density");
        assert_eq!(srows.len(), profile.len());
        for (row, v) in srows.iter().zip(&profile.values) {
            assert_eq!(row[2], *v);
        }
    }
}
