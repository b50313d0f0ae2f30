//! Forward semi-Lagrangian scheme on conformal triangular meshes in 2D.
//!
//! Mass sits on mesh nodes. One step moves each loaded node by `dt * a_i`,
//! finds the triangle of the node's star owning the displaced point (the
//! CFL condition `w_inf * dt <= hbar` keeps it inside the star) and splits
//! the mass onto the triangle's summits by barycentric coordinates, which
//! are nonnegative by construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::record::{DiagRow, RunRecord};

/// Barycentric slack for triangle membership tests: adjacent triangles tile
/// the plane only up to rounding, so ownership admits this much negativity.
const BARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TriangularMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    node_stars: Vec<Vec<usize>>,
    hbar: f64,
}

fn tri_signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl TriangularMesh {
    /// Build and validate a mesh: node indices in range, nondegenerate
    /// triangles, conformal edges (each shared edge bounds exactly two
    /// triangles), no node inside an open edge, positive minimal height.
    pub fn new(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<TriangularMesh> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh needs nodes and triangles".into()));
        }
        let mut hbar = f64::INFINITY;
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (k, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nodes.len() {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {k} references missing node {i}"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {k} repeats a summit")));
            }
            let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            let area = tri_signed_area(a, b, c).abs();
            let longest = dist(a, b).max(dist(b, c)).max(dist(a, c));
            if !(area > 1e-14 * longest * longest) {
                return Err(Error::InvalidMesh(format!("triangle {k} is degenerate")));
            }
            hbar = hbar.min(2.0 * area / longest);
            for (i, j) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])] {
                *edge_count.entry((i.min(j), i.max(j))).or_insert(0) += 1;
            }
        }
        for (&(i, j), &count) in &edge_count {
            if count > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({i}, {j}) bounds {count} triangles"
                )));
            }
        }
        // A summit must not sit inside the open edge of another triangle.
        for &(i, j) in edge_count.keys() {
            let (a, b) = (nodes[i], nodes[j]);
            let len = dist(a, b);
            for (n, &x) in nodes.iter().enumerate() {
                if n == i || n == j {
                    continue;
                }
                if x[0] < a[0].min(b[0]) - 1e-12
                    || x[0] > a[0].max(b[0]) + 1e-12
                    || x[1] < a[1].min(b[1]) - 1e-12
                    || x[1] > a[1].max(b[1]) + 1e-12
                {
                    continue;
                }
                let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
                let t = ((x[0] - a[0]) * (b[0] - a[0]) + (x[1] - a[1]) * (b[1] - a[1])) / (len * len);
                if cross.abs() < 1e-12 * len && t > 1e-12 && t < 1.0 - 1e-12 {
                    return Err(Error::InvalidMesh(format!(
                        "node {n} lies inside the open edge ({i}, {j})"
                    )));
                }
            }
        }
        let mut node_stars = vec![Vec::new(); nodes.len()];
        for (k, tri) in triangles.iter().enumerate() {
            for &i in tri {
                node_stars[i].push(k);
            }
        }
        Ok(TriangularMesh { nodes, triangles, node_stars, hbar })
    }

    /// Diagonal split of an `nx x ny` Cartesian grid over `[x0, x0 + nx h]
    /// x [y0, y0 + ny h]`: every square becomes two right triangles, so
    /// `hbar = h / sqrt(2)`.
    pub fn structured(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<TriangularMesh> {
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for jy in 0..=ny {
            for jx in 0..=nx {
                nodes.push([x0 + jx as f64 * h, y0 + jy as f64 * h]);
            }
        }
        let id = |jx: usize, jy: usize| jy * (nx + 1) + jx;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for jy in 0..ny {
            for jx in 0..nx {
                triangles.push([id(jx, jy), id(jx + 1, jy), id(jx + 1, jy + 1)]);
                triangles.push([id(jx, jy), id(jx + 1, jy + 1), id(jx, jy + 1)]);
            }
        }
        TriangularMesh::new(nodes, triangles)
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn star(&self, i: usize) -> &[usize] {
        &self.node_stars[i]
    }

    /// `inf_k h(T_k)`, the smallest triangle height of the mesh.
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Barycentric coordinates of `xi` in triangle `k` as signed-area
    /// ratios; they sum to 1 and reproduce `xi` as the weighted summit
    /// combination.
    pub fn barycentric(&self, k: usize, xi: [f64; 2]) -> Result<[f64; 3]> {
        let [i1, i2, i3] = self.triangles[k];
        let (a, b, c) = (self.nodes[i1], self.nodes[i2], self.nodes[i3]);
        let area = tri_signed_area(a, b, c);
        let longest = dist(a, b).max(dist(b, c)).max(dist(a, c));
        if area.abs() <= 1e-14 * longest * longest {
            return Err(Error::DegenerateTriangle { triangle: k, area: area.abs() });
        }
        Ok([
            tri_signed_area(xi, b, c) / area,
            tri_signed_area(a, xi, c) / area,
            tri_signed_area(a, b, xi) / area,
        ])
    }

    /// Triangle of the star of `start_node` owning `y`: the lowest-index
    /// incident triangle containing `y` (shared edges and vertices thus go
    /// to the lowest index).
    pub fn locate(&self, start_node: usize, y: [f64; 2]) -> Result<usize> {
        let mut best: Option<usize> = None;
        for &k in &self.node_stars[start_node] {
            let lam = self.barycentric(k, y)?;
            if lam.iter().all(|&l| l >= -BARY_TOL) && best.map_or(true, |b| k < b) {
                best = Some(k);
            }
        }
        best.ok_or(Error::OutsideStar { node: start_node, point: y.to_vec() })
    }

    /// Parse the text format `v x y` (nodes, in order) then `t i1 i2 i3`
    /// (0-based summits). Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<TriangularMesh> {
        let mut nodes = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| {
                Error::InvalidMesh(format!("line {}: {what}: '{line}'", lineno + 1))
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.first() {
                Some(&"v") if fields.len() == 3 => {
                    let x = fields[1].parse().map_err(|_| bad("bad coordinate"))?;
                    let y = fields[2].parse().map_err(|_| bad("bad coordinate"))?;
                    nodes.push([x, y]);
                }
                Some(&"t") if fields.len() == 4 => {
                    let mut tri = [0usize; 3];
                    for (slot, f) in tri.iter_mut().zip(&fields[1..]) {
                        *slot = f.parse().map_err(|_| bad("bad node index"))?;
                    }
                    triangles.push(tri);
                }
                _ => return Err(bad("expected 'v x y' or 't i1 i2 i3'")),
            }
        }
        TriangularMesh::new(nodes, triangles)
    }

    pub fn load(path: &Path) -> Result<TriangularMesh> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        TriangularMesh::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            writeln!(out, "v {} {}", n[0], n[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "t {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }
}

/// A unit-mass measure on mesh nodes.
#[derive(Debug, Clone)]
pub struct NodeMeasure {
    mesh: Arc<TriangularMesh>,
    weights: BTreeMap<usize, f64>,
}

impl NodeMeasure {
    pub fn from_weights(mesh: Arc<TriangularMesh>, weights: BTreeMap<usize, f64>) -> Result<Self> {
        let mut total = 0.0;
        for (&i, &w) in &weights {
            if i >= mesh.nodes().len() {
                return Err(Error::Config(format!("weight on missing node {i}")));
            }
            if w < 0.0 {
                return Err(Error::Config(format!("negative weight {w} on node {i}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotAProbability { total });
        }
        let weights = weights.into_iter().filter(|&(_, w)| w > 0.0).collect();
        Ok(NodeMeasure { mesh, weights })
    }

    /// Project a density on the mesh: each triangle's mass (midpoint rule
    /// at the centroid) goes to the triangle's lowest-index summit, then
    /// the weights are renormalized.
    pub fn from_density(
        mesh: Arc<TriangularMesh>,
        f: &dyn Fn(&[f64]) -> f64,
    ) -> Result<NodeMeasure> {
        let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
        for tri in mesh.triangles() {
            let (a, b, c) = (mesh.node(tri[0]), mesh.node(tri[1]), mesh.node(tri[2]));
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            let v = f(&centroid);
            if v < 0.0 {
                return Err(Error::Config(format!("density is negative at {centroid:?}")));
            }
            let mass = v * tri_signed_area(a, b, c).abs();
            if mass > 0.0 {
                *weights.entry(*tri.iter().min().unwrap()).or_insert(0.0) += mass;
            }
        }
        let total: f64 = weights.values().sum();
        if !(total > 0.0) {
            return Err(Error::Config("density carries no mass on the mesh".into()));
        }
        for w in weights.values_mut() {
            *w /= total;
        }
        NodeMeasure::from_weights(mesh, weights)
    }

    pub fn mesh(&self) -> &Arc<TriangularMesh> {
        &self.mesh
    }

    pub fn weights(&self) -> &BTreeMap<usize, f64> {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn center_of_mass(&self) -> [f64; 2] {
        let mut com = [0.0, 0.0];
        for (&i, &w) in &self.weights {
            let x = self.mesh.node(i);
            com[0] += w * x[0];
            com[1] += w * x[1];
        }
        com
    }

    pub fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .map(|(&i, &w)| {
                let x = self.mesh.node(i);
                w * (x[0] * x[0] + x[1] * x[1])
            })
            .sum()
    }

    /// Second moment about the center of mass.
    pub fn spread(&self) -> f64 {
        let com = self.center_of_mass();
        self.weights
            .iter()
            .map(|(&i, &w)| {
                let x = self.mesh.node(i);
                w * ((x[0] - com[0]).powi(2) + (x[1] - com[1]).powi(2))
            })
            .sum()
    }

    pub fn atoms(&self) -> Vec<(Vec<f64>, f64)> {
        self.weights
            .iter()
            .map(|(&i, &w)| (self.mesh.node(i).to_vec(), w))
            .collect()
    }
}

/// Node velocities `a_i = -sum_j rho_j grad_hat W(x_i - x_j)` on the
/// support of the measure.
pub fn tri_velocity(m: &NodeMeasure, p: &Potential) -> BTreeMap<usize, [f64; 2]> {
    let mut out = BTreeMap::new();
    let mut grad = [0.0; 2];
    for &i in m.weights().keys() {
        let xi = m.mesh().node(i);
        let mut a = [0.0, 0.0];
        for (&j, &w) in m.weights() {
            let xj = m.mesh().node(j);
            p.grad_hat(&[xi[0] - xj[0], xi[1] - xj[1]], &mut grad);
            a[0] -= w * grad[0];
            a[1] -= w * grad[1];
        }
        out.insert(i, a);
    }
    out
}

/// One semi-Lagrangian step under the CFL condition `w_inf * dt <= hbar`.
pub fn tri_step(m: &NodeMeasure, p: &Potential, dt: f64) -> Result<NodeMeasure> {
    let w_inf = p.w_inf().ok_or(Error::UnboundedGradient)?;
    let hbar = m.mesh().hbar();
    if w_inf * dt > hbar {
        return Err(Error::CflViolation { margin: hbar - w_inf * dt, w_inf, dt });
    }
    let vel = tri_velocity(m, p);
    let mut next: BTreeMap<usize, f64> = BTreeMap::new();
    for (&i, &rho) in m.weights() {
        let a = vel[&i];
        let x = m.mesh().node(i);
        let y = [x[0] + dt * a[0], x[1] + dt * a[1]];
        let k = m.mesh().locate(i, y)?;
        let lam = m.mesh().barycentric(k, y)?;
        for (slot, &l) in m.mesh().triangles()[k].iter().zip(&lam) {
            if l != 0.0 {
                *next.entry(*slot).or_insert(0.0) += rho * l;
            }
        }
    }
    let next = next.into_iter().filter(|&(_, w)| w > 0.0).collect();
    Ok(NodeMeasure { mesh: Arc::clone(m.mesh()), weights: next })
}

/// Iterate [`tri_step`] to `ceil(t_final / dt)` steps.
pub fn tri_run<F>(
    initial: NodeMeasure,
    p: &Potential,
    dt: f64,
    t_final: f64,
    mut observer: F,
) -> Result<RunRecord>
where
    F: FnMut(usize, f64, &NodeMeasure),
{
    let n_steps = if t_final > 0.0 { (t_final / dt).ceil() as usize } else { 0 };
    let mut record = RunRecord::new("simplicial");
    let mut m = initial;
    let row = |n: usize, m: &NodeMeasure| DiagRow {
        n,
        t: n as f64 * dt,
        mass: m.mass(),
        com: m.center_of_mass().to_vec(),
        second_moment: m.second_moment(),
        energy: None,
    };
    observer(0, 0.0, &m);
    record.rows.push(row(0, &m));
    for n in 1..=n_steps {
        let start = std::time::Instant::now();
        m = tri_step(&m, p, dt)?;
        record.wall_seconds_per_step.push(start.elapsed().as_secs_f64());
        observer(n, n as f64 * dt, &m);
        record.rows.push(row(n, &m));
    }
    Ok(record)
}

/// The interpolation weight of node `j` at point `y` near node `start`:
/// the barycentric coordinate of `y` in the owning triangle if `j` is one
/// of its summits, zero otherwise.
pub fn tri_weight(mesh: &TriangularMesh, start: usize, y: [f64; 2], j: usize) -> Result<f64> {
    let k = mesh.locate(start, y)?;
    let lam = mesh.barycentric(k, y)?;
    Ok(mesh.triangles()[k]
        .iter()
        .zip(&lam)
        .find(|(&s, _)| s == j)
        .map(|(_, &l)| l)
        .unwrap_or(0.0))
}

/// Check conformality and the height bound of a mesh file, returning a
/// short human-readable report.
pub fn validate_mesh_file(path: &Path) -> Result<String> {
    let mesh = TriangularMesh::load(path)?;
    let mut boundary_edges = 0usize;
    let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for tri in mesh.triangles() {
        for (i, j) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])] {
            *edge_count.entry((i.min(j), i.max(j))).or_insert(0) += 1;
        }
    }
    for &c in edge_count.values() {
        if c == 1 {
            boundary_edges += 1;
        }
    }
    Ok(format!(
        "mesh ok: {} nodes, {} triangles, {} edges ({} boundary), hbar = {:.6e}",
        mesh.nodes().len(),
        mesh.triangles().len(),
        edge_count.len(),
        boundary_edges,
        mesh.hbar()
    ))
}
