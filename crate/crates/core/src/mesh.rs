//! Tetrahedral meshes of the defect site.
//!
//! The cylinder mesher builds a structured cross-section (a centre node plus
//! concentric rings whose node counts are multiples of four, so the section is
//! invariant under quarter turns), extrudes it in axial layers and splits every
//! prism into three tetrahedra. The split follows the section node numbering,
//! which makes neighbouring prisms agree on their shared quad diagonals.
//!
//! An optional fixateur plate is attached on the `+x` side. Its inner face
//! follows the cylinder surface so the two regions share nodes along the
//! contact band.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::ValidationReport;

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Scaffold,
    Fixateur,
}

impl Region {
    pub fn code(self) -> i32 {
        match self {
            Region::Scaffold => 0,
            Region::Fixateur => 1,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            0 => Some(Region::Scaffold),
            1 => Some(Region::Fixateur),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElasticRole {
    Dirichlet,
    NeumannLoaded,
    NeumannFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffusionRole {
    DirichletBone,
    NoFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryTag {
    pub elastic: ElasticRole,
    pub diffusion: DiffusionRole,
}

impl BoundaryTag {
    pub const fn new(elastic: ElasticRole, diffusion: DiffusionRole) -> Self {
        Self { elastic, diffusion }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTri {
    pub nodes: [usize; 3],
    pub tag: BoundaryTag,
}

/// Rectangular plate attached to the lateral surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixateurSpec {
    /// Axial extent (mm), centred on the defect.
    pub length: f64,
    /// Tangential extent (mm).
    pub width: f64,
    /// Radial thickness measured from the cylinder radius (mm).
    pub thickness: f64,
}

impl Default for FixateurSpec {
    fn default() -> Self {
        Self {
            length: 30.0,
            width: 10.0,
            thickness: 4.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveDimension { name: &'static str, value: f64 },
    #[error("target edge {target_edge} mm is not smaller than the radius {radius} mm")]
    TooCoarse { target_edge: f64, radius: f64 },
    #[error("invalid fixateur: {0}")]
    InvalidFixateur(String),
    #[error("invalid box mesh: {0}")]
    InvalidBox(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    pub boundary: Vec<BoundaryTri>,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshDefect {
    RegionCountMismatch { tets: usize, regions: usize },
    TetIndexOutOfRange { tet: usize, node: usize },
    TriIndexOutOfRange { tri: usize, node: usize },
    NonPositiveVolume { tet: usize, volume: f64 },
    TriNotAFace { tri: usize },
    TriOnInteriorFace { tri: usize, tets: usize },
    DuplicateTri { tri: usize },
    UncoveredBoundaryFace { tet: usize, face: [usize; 3] },
    OpenEdge { edge: [usize; 2], tris: usize },
}

impl fmt::Display for MeshDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshDefect::RegionCountMismatch { tets, regions } => {
                write!(f, "{regions} region labels for {tets} tets")
            }
            MeshDefect::TetIndexOutOfRange { tet, node } => {
                write!(f, "tet {tet} references missing node {node}")
            }
            MeshDefect::TriIndexOutOfRange { tri, node } => {
                write!(f, "boundary triangle {tri} references missing node {node}")
            }
            MeshDefect::NonPositiveVolume { tet, volume } => {
                write!(f, "tet {tet} has signed volume {volume:e}")
            }
            MeshDefect::TriNotAFace { tri } => {
                write!(f, "boundary triangle {tri} is not a face of any tet")
            }
            MeshDefect::TriOnInteriorFace { tri, tets } => {
                write!(f, "boundary triangle {tri} is shared by {tets} tets")
            }
            MeshDefect::DuplicateTri { tri } => write!(f, "boundary triangle {tri} is duplicated"),
            MeshDefect::UncoveredBoundaryFace { tet, face } => {
                write!(f, "boundary face {face:?} of tet {tet} carries no tag")
            }
            MeshDefect::OpenEdge { edge, tris } => {
                write!(f, "boundary edge {edge:?} is used by {tris} triangles")
            }
        }
    }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn signed_volume(p: [Point; 4]) -> f64 {
    dot(sub(p[1], p[0]), cross(sub(p[2], p[0]), sub(p[3], p[0]))) / 6.0
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

fn tet_faces(t: [usize; 4]) -> [([usize; 3], usize); 4] {
    // (face, opposite vertex)
    [
        ([t[1], t[2], t[3]], t[0]),
        ([t[0], t[2], t[3]], t[1]),
        ([t[0], t[1], t[3]], t[2]),
        ([t[0], t[1], t[2]], t[3]),
    ]
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tet_count(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, tet: usize) -> [Point; 4] {
        self.tets[tet].map(|n| self.nodes[n])
    }

    pub fn tet_volume(&self, tet: usize) -> f64 {
        signed_volume(self.tet_points(tet))
    }

    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn region_volume(&self, region: Region) -> f64 {
        (0..self.tets.len())
            .filter(|&t| self.regions[t] == region)
            .map(|t| self.tet_volume(t))
            .sum()
    }

    pub fn tri_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.boundary[tri].nodes.map(|n| self.nodes[n]);
        let n = cross(sub(b, a), sub(c, a));
        0.5 * dot(n, n).sqrt()
    }

    /// Lumped nodal volumes: each node receives a quarter of every adjacent tet.
    pub fn node_volumes(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for (t, tet) in self.tets.iter().enumerate() {
            let v = self.tet_volume(t) / 4.0;
            for &n in tet {
                w[n] += v;
            }
        }
        w
    }

    /// Nodes all of whose adjacent elements belong to the fixateur.
    pub fn fixateur_only_nodes(&self) -> Vec<bool> {
        let mut touches_scaffold = vec![false; self.nodes.len()];
        let mut touches_any = vec![false; self.nodes.len()];
        for (tet, region) in self.tets.iter().zip(&self.regions) {
            for &n in tet {
                touches_any[n] = true;
                if *region == Region::Scaffold {
                    touches_scaffold[n] = true;
                }
            }
        }
        touches_any
            .iter()
            .zip(&touches_scaffold)
            .map(|(&any, &scaffold)| any && !scaffold)
            .collect()
    }

    pub fn has_fixateur(&self) -> bool {
        self.regions.contains(&Region::Fixateur)
    }

    /// Axial extent (min z, max z).
    pub fn z_range(&self) -> (f64, f64) {
        self.nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[2]), hi.max(p[2]))
            })
    }

    /// Nodes on a boundary triangle whose tag satisfies `pred`, sorted and deduplicated.
    pub fn nodes_where(&self, pred: impl Fn(&BoundaryTag) -> bool) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary
            .iter()
            .filter(|t| pred(&t.tag))
            .flat_map(|t| t.nodes)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Copy of the mesh with every boundary tag rewritten by `f`.
    pub fn map_tags(&self, f: impl Fn(&BoundaryTri, &Mesh) -> BoundaryTag) -> Mesh {
        let mut out = self.clone();
        for (tri, orig) in out.boundary.iter_mut().zip(&self.boundary) {
            tri.tag = f(orig, self);
        }
        out
    }

    /// Index of the node nearest to `p`.
    pub fn nearest_node(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in self.nodes.iter().enumerate() {
            let d = sub(*q, p);
            let d2 = dot(d, d);
            if d2 < best_d {
                best_d = d2;
                best = i;
            }
        }
        best
    }
}

/// Sum of boundary triangle areas whose tag satisfies `pred` (mm²).
pub fn boundary_area(mesh: &Mesh, pred: impl Fn(&BoundaryTag) -> bool) -> f64 {
    (0..mesh.boundary.len())
        .filter(|&i| pred(&mesh.boundary[i].tag))
        .map(|i| mesh.tri_area(i))
        .sum()
}

pub fn validate_mesh(mesh: &Mesh) -> ValidationReport<MeshDefect> {
    let mut report = ValidationReport::new();
    let n = mesh.nodes.len();

    if mesh.regions.len() != mesh.tets.len() {
        report.push(MeshDefect::RegionCountMismatch {
            tets: mesh.tets.len(),
            regions: mesh.regions.len(),
        });
    }

    let mut tets_ok = vec![true; mesh.tets.len()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        for &node in tet {
            if node >= n {
                report.push(MeshDefect::TetIndexOutOfRange { tet: t, node });
                tets_ok[t] = false;
            }
        }
        if tets_ok[t] {
            let volume = mesh.tet_volume(t);
            if volume <= 0.0 || !volume.is_finite() {
                report.push(MeshDefect::NonPositiveVolume { tet: t, volume });
            }
        }
    }

    let mut face_owners: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        if !tets_ok[t] {
            continue;
        }
        for (face, _) in tet_faces(*tet) {
            let e = face_owners.entry(sorted3(face)).or_insert((0, t));
            e.0 += 1;
        }
    }

    let mut seen_tris: HashMap<[usize; 3], usize> = HashMap::new();
    let mut edge_use: HashMap<[usize; 2], usize> = HashMap::new();
    for (i, tri) in mesh.boundary.iter().enumerate() {
        if let Some(&node) = tri.nodes.iter().find(|&&v| v >= n) {
            report.push(MeshDefect::TriIndexOutOfRange { tri: i, node });
            continue;
        }
        let key = sorted3(tri.nodes);
        match face_owners.get(&key) {
            None => report.push(MeshDefect::TriNotAFace { tri: i }),
            Some(&(count, _)) if count != 1 => {
                report.push(MeshDefect::TriOnInteriorFace {
                    tri: i,
                    tets: count,
                })
            }
            _ => {}
        }
        if seen_tris.insert(key, i).is_some() {
            report.push(MeshDefect::DuplicateTri { tri: i });
        }
        for k in 0..3 {
            let (a, b) = (tri.nodes[k], tri.nodes[(k + 1) % 3]);
            *edge_use.entry([a.min(b), a.max(b)]).or_insert(0) += 1;
        }
    }

    let mut uncovered: Vec<([usize; 3], usize)> = face_owners
        .iter()
        .filter(|(face, (count, _))| *count == 1 && !seen_tris.contains_key(*face))
        .map(|(face, (_, t))| (*face, *t))
        .collect();
    uncovered.sort_unstable();
    for (face, tet) in uncovered {
        report.push(MeshDefect::UncoveredBoundaryFace { tet, face });
    }

    let mut open: Vec<([usize; 2], usize)> = edge_use
        .into_iter()
        .filter(|(_, count)| *count != 2)
        .collect();
    open.sort_unstable();
    for (edge, tris) in open {
        report.push(MeshDefect::OpenEdge { edge, tris });
    }

    report
}

/// 2D section: points, triangles and the region of each triangle.
struct Section {
    points: Vec<[f64; 2]>,
    tris: Vec<([usize; 3], Region)>,
}

fn ring_count(k: usize) -> usize {
    4 * ((2.0 * PI * k as f64 / 4.0).round() as usize).max(1)
}

fn disk_section(radius: f64, rings: usize) -> (Section, Vec<usize>) {
    let mut points = vec![[0.0, 0.0]];
    let mut tris = Vec::new();
    let mut prev: Vec<usize> = vec![0];
    for k in 1..=rings {
        let count = ring_count(k);
        let r = if k == rings {
            radius
        } else {
            radius * k as f64 / rings as f64
        };
        let ring: Vec<usize> = (0..count)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / count as f64;
                points.push([r * theta.cos(), r * theta.sin()]);
                points.len() - 1
            })
            .collect();
        if prev.len() == 1 {
            for j in 0..count {
                tris.push(([prev[0], ring[j], ring[(j + 1) % count]], Region::Scaffold));
            }
        } else {
            stitch_rings(&prev, &ring, &mut tris);
        }
        prev = ring;
    }
    (Section { points, tris }, prev)
}

/// Triangulates the annulus between two concentric rings that both start at angle zero.
fn stitch_rings(inner: &[usize], outer: &[usize], tris: &mut Vec<([usize; 3], Region)>) {
    let (ni, no) = (inner.len(), outer.len());
    let angle = |j: usize, n: usize| 2.0 * PI * j as f64 / n as f64;
    let (mut i, mut j) = (0, 0);
    while i < ni || j < no {
        let next_in = if i < ni { angle(i + 1, ni) } else { f64::INFINITY };
        let next_out = if j < no { angle(j + 1, no) } else { f64::INFINITY };
        if next_out <= next_in + 1e-12 {
            tris.push((
                [inner[i % ni], outer[(j + 1) % no], outer[j % no]],
                Region::Scaffold,
            ));
            j += 1;
        } else {
            tris.push((
                [inner[i % ni], inner[(i + 1) % ni], outer[j % no]],
                Region::Scaffold,
            ));
            i += 1;
        }
    }
}

fn attach_fixateur(
    section: &mut Section,
    outer_ring: &[usize],
    radius: f64,
    target_edge: f64,
    spec: &FixateurSpec,
) -> Result<(), MeshError> {
    if !(spec.width > 0.0 && spec.thickness > 0.0 && spec.length > 0.0) {
        return Err(MeshError::InvalidFixateur(format!(
            "dimensions must be positive, got {spec:?}"
        )));
    }
    if spec.width >= 2.0 * radius {
        return Err(MeshError::InvalidFixateur(format!(
            "width {} mm exceeds the cylinder diameter",
            spec.width
        )));
    }
    let count = outer_ring.len();
    let half = 0.5 * spec.width + 1e-9 * radius;
    let mut m = 0;
    while m + 1 < count / 4 {
        let theta = 2.0 * PI * (m + 1) as f64 / count as f64;
        if radius * theta.sin() > half {
            break;
        }
        m += 1;
    }
    if m == 0 {
        return Err(MeshError::InvalidFixateur(format!(
            "width {} mm is narrower than the surface node spacing",
            spec.width
        )));
    }
    let layers = ((spec.thickness / target_edge).ceil() as usize).max(1);
    let outer_x = radius + spec.thickness;
    // columns[c][s]: c runs over ring offsets -m..=m, s over through-thickness levels
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(2 * m + 1);
    for offset in -(m as isize)..=(m as isize) {
        let ring_idx = offset.rem_euclid(count as isize) as usize;
        let base = outer_ring[ring_idx];
        let [x0, y0] = section.points[base];
        let mut col = vec![base];
        for s in 1..=layers {
            let x = x0 + (outer_x - x0) * s as f64 / layers as f64;
            section.points.push([x, y0]);
            col.push(section.points.len() - 1);
        }
        columns.push(col);
    }
    for c in 0..2 * m {
        let lower_half = (c as isize) < m as isize;
        for s in 0..layers {
            let p00 = columns[c][s];
            let p10 = columns[c + 1][s];
            let p11 = columns[c + 1][s + 1];
            let p01 = columns[c][s + 1];
            // mirror the diagonal across the x axis
            if lower_half {
                section.tris.push(([p00, p10, p01], Region::Fixateur));
                section.tris.push(([p10, p11, p01], Region::Fixateur));
            } else {
                section.tris.push(([p00, p10, p11], Region::Fixateur));
                section.tris.push(([p00, p11, p01], Region::Fixateur));
            }
        }
    }
    Ok(())
}

/// Tags a boundary face of a tet in `region` by its axial position.
fn tag_face(region: Region, zs: [f64; 3], z_min: f64, z_max: f64, tol: f64) -> BoundaryTag {
    let bottom = zs.iter().all(|z| (z - z_min).abs() <= tol);
    let top = zs.iter().all(|z| (z - z_max).abs() <= tol);
    use DiffusionRole::*;
    use ElasticRole::*;
    match region {
        Region::Scaffold if bottom => BoundaryTag::new(Dirichlet, DirichletBone),
        Region::Scaffold if top => BoundaryTag::new(NeumannLoaded, DirichletBone),
        Region::Scaffold => BoundaryTag::new(NeumannFree, NoFlux),
        Region::Fixateur if bottom => BoundaryTag::new(Dirichlet, NoFlux),
        Region::Fixateur => BoundaryTag::new(NeumannFree, NoFlux),
    }
}

/// Assembles a mesh from raw tets: fixes orientation, drops unused nodes,
/// extracts the outward-oriented boundary and tags it.
fn finish_mesh(
    nodes: Vec<Point>,
    mut tets: Vec<[usize; 4]>,
    regions: Vec<Region>,
    z_min: f64,
    z_max: f64,
) -> Mesh {
    for tet in tets.iter_mut() {
        if signed_volume(tet.map(|n| nodes[n])) < 0.0 {
            tet.swap(2, 3);
        }
    }

    let mut used = vec![false; nodes.len()];
    for &n in tets.iter().flatten() {
        used[n] = true;
    }
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut kept = Vec::new();
    for (i, p) in nodes.iter().enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(*p);
        }
    }
    let tets: Vec<[usize; 4]> = tets.iter().map(|t| t.map(|n| remap[n])).collect();

    let mut counts: HashMap<[usize; 3], usize> = HashMap::new();
    for tet in &tets {
        for (face, _) in tet_faces(*tet) {
            *counts.entry(sorted3(face)).or_insert(0) += 1;
        }
    }
    let tol = 1e-6 * (z_max - z_min);
    let mut boundary = Vec::new();
    for (t, tet) in tets.iter().enumerate() {
        for (mut face, opposite) in tet_faces(*tet) {
            if counts[&sorted3(face)] != 1 {
                continue;
            }
            let [a, b, c] = face.map(|n| kept[n]);
            let normal = cross(sub(b, a), sub(c, a));
            if dot(normal, sub(kept[opposite], a)) > 0.0 {
                face.swap(1, 2);
            }
            let zs = face.map(|n| kept[n][2]);
            boundary.push(BoundaryTri {
                nodes: face,
                tag: tag_face(regions[t], zs, z_min, z_max, tol),
            });
        }
    }

    Mesh {
        nodes: kept,
        tets,
        boundary,
        regions,
    }
}

/// Mesh from raw tets, tagged by axial position like the generated cylinder:
/// the lowest plane is clamped, the highest loaded, both bone interfaces.
pub fn mesh_from_tets(nodes: Vec<Point>, tets: Vec<[usize; 4]>, regions: Vec<Region>) -> Mesh {
    let (z_min, z_max) = nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[2]), hi.max(p[2])));
    finish_mesh(nodes, tets, regions, z_min, z_max)
}

/// Splits the prism over section triangle `tri` between two layers.
fn split_prism(tri: [usize; 3], bottom: usize, top: usize) -> [[usize; 4]; 3] {
    let v = sorted3(tri);
    let b = v.map(|i| bottom + i);
    let t = v.map(|i| top + i);
    [
        [b[0], b[1], b[2], t[2]],
        [b[0], b[1], t[1], t[2]],
        [b[0], t[0], t[1], t[2]],
    ]
}

pub fn build_cylinder_mesh(
    length: f64,
    radius: f64,
    target_edge: f64,
    fixateur: Option<&FixateurSpec>,
) -> Result<Mesh, MeshError> {
    for (name, value) in [
        ("length", length),
        ("radius", radius),
        ("target_edge", target_edge),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(MeshError::NonPositiveDimension { name, value });
        }
    }
    if target_edge >= radius {
        return Err(MeshError::TooCoarse {
            target_edge,
            radius,
        });
    }

    let rings = (radius / target_edge - 1e-9).ceil() as usize;
    let (mut section, outer_ring) = disk_section(radius, rings.max(1));
    if let Some(spec) = fixateur {
        if spec.length > length * (1.0 + 1e-9) {
            return Err(MeshError::InvalidFixateur(format!(
                "plate length {} mm exceeds the defect length {length} mm",
                spec.length
            )));
        }
        attach_fixateur(&mut section, &outer_ring, radius, target_edge, spec)?;
    }

    let layers = (length / target_edge - 1e-9).ceil() as usize;
    let n2d = section.points.len();
    let mut nodes = Vec::with_capacity(n2d * (layers + 1));
    for l in 0..=layers {
        let z = if l == layers {
            length
        } else {
            length * l as f64 / layers as f64
        };
        nodes.extend(section.points.iter().map(|p| [p[0], p[1], z]));
    }

    let (plate_lo, plate_hi) = match fixateur {
        Some(spec) => {
            let tol = 1e-9 * length;
            (
                0.5 * (length - spec.length) - tol,
                0.5 * (length + spec.length) + tol,
            )
        }
        None => (0.0, 0.0),
    };
    let mut tets = Vec::new();
    let mut regions = Vec::new();
    for l in 0..layers {
        let z_lo = length * l as f64 / layers as f64;
        let z_hi = length * (l + 1) as f64 / layers as f64;
        let plate_layer = z_lo >= plate_lo && z_hi <= plate_hi;
        for &(tri, region) in &section.tris {
            if region == Region::Fixateur && !plate_layer {
                continue;
            }
            for tet in split_prism(tri, l * n2d, (l + 1) * n2d) {
                tets.push(tet);
                regions.push(region);
            }
        }
    }

    Ok(finish_mesh(nodes, tets, regions, 0.0, length))
}

/// Structured box `[0,ex]×[0,ey]×[0,ez]` with every hexahedron split into six
/// tets along its main diagonal. Caps are tagged like the cylinder caps.
pub fn build_box_mesh(extent: [f64; 3], divisions: [usize; 3]) -> Result<Mesh, MeshError> {
    if extent.iter().any(|e| !(*e > 0.0)) || divisions.contains(&0) {
        return Err(MeshError::InvalidBox(format!(
            "extent {extent:?} and divisions {divisions:?} must be positive"
        )));
    }
    let [nx, ny, nz] = divisions;
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    extent[0] * i as f64 / nx as f64,
                    extent[1] * j as f64 / ny as f64,
                    extent[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]), 0, 0, 0];
                    for (s, axis) in perm.iter().enumerate() {
                        c[*axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    let regions = vec![Region::Scaffold; tets.len()];
    Ok(finish_mesh(nodes, tets, regions, 0.0, extent[2]))
}
