//! Validated 2-manifold triangle meshes and their per-element geometry.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result, ValidationError};
use crate::poisson::VertexMap;

pub type Vec3 = Vector3<f64>;

/// An immutable, validated triangle mesh.
///
/// Construction checks index ranges, degeneracy, edge and vertex
/// manifoldness, consistent counterclockwise orientation, and that the mesh
/// forms a single connected component. Open (disk-like) meshes are accepted.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    normals: Vec<Vec3>,
    centroids: Vec<Vec3>,
    vertex_masses: Vec<f64>,
}

/// Relative degeneracy threshold: triangles with area below this times the
/// squared bounding-box diagonal are rejected.
pub const AREA_EPSILON: f64 = 1e-12;

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, ValidationError> {
        if triangles.is_empty() {
            return Err(ValidationError::Empty);
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(ValidationError::IndexOutOfRange {
                        triangle: t,
                        vertex: v,
                        count: n,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(ValidationError::RepeatedVertex { triangle: t });
            }
        }

        let diag = bounding_box_diagonal(&vertices);
        let area_eps = AREA_EPSILON * diag * diag;
        let mut areas = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        for (t, &[a, b, c]) in triangles.iter().enumerate() {
            let cross = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
            let norm = cross.norm();
            let area = 0.5 * norm;
            if !(area > area_eps) {
                return Err(ValidationError::Degenerate { triangle: t, area });
            }
            areas.push(area);
            normals.push(cross / norm);
            centroids.push((vertices[a] + vertices[b] + vertices[c]) / 3.0);
        }

        check_topology(n, &triangles)?;

        let mut vertex_masses = vec![0.0; n];
        for (tri, &area) in triangles.iter().zip(&areas) {
            for &v in tri {
                vertex_masses[v] += area / 3.0;
            }
        }

        Ok(Self {
            vertices,
            triangles,
            areas,
            normals,
            centroids,
            vertex_masses,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn centroids(&self) -> &[Vec3] {
        &self.centroids
    }

    /// Barycentric lumped masses: a third of each incident triangle's area.
    pub fn vertex_masses(&self) -> &[f64] {
        &self.vertex_masses
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bounding_box_diagonal(&self.vertices)
    }

    /// Area-weighted mean of the triangle centroids.
    pub fn area_centroid(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        for (c, a) in self.centroids.iter().zip(&self.areas) {
            acc += c * *a;
        }
        acc / self.total_area()
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for ((tri, n), a) in self.triangles.iter().zip(&self.normals).zip(&self.areas) {
            for &v in tri {
                acc[v] += n * *a;
            }
        }
        acc.into_iter().map(|n| n.normalize()).collect()
    }

    /// Unique undirected edges as `(min, max)` pairs, in first-seen order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push([key.0, key.1]);
                }
            }
        }
        out
    }

    /// Vertex adjacency lists, sorted.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for [a, b] in self.edges() {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
        for n in &mut nbrs {
            n.sort_unstable();
        }
        nbrs
    }

    /// Boundary loops, each ordered so the mesh interior lies to the left
    /// (the direction of the triangles' own boundary half-edges).
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut directed = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                directed.insert((tri[k], tri[(k + 1) % 3]), ());
            }
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut starts = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if !directed.contains_key(&(b, a)) {
                    next.insert(a, b);
                    starts.push(a);
                }
            }
        }
        let mut visited = HashMap::new();
        let mut loops = Vec::new();
        for s in starts {
            if visited.contains_key(&s) {
                continue;
            }
            let mut lp = Vec::new();
            let mut v = s;
            loop {
                visited.insert(v, ());
                lp.push(v);
                v = next[&v];
                if v == s {
                    break;
                }
            }
            loops.push(lp);
        }
        loops
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Disk topology: Euler characteristic 1 and exactly one boundary loop.
    pub fn check_disk(&self) -> Result<(), ValidationError> {
        let chi = self.euler_characteristic();
        let loops = self.boundary_loops().len();
        if chi != 1 || loops != 1 {
            return Err(ValidationError::NotDisk {
                reason: format!("euler characteristic {chi}, {loops} boundary loops"),
            });
        }
        Ok(())
    }

    /// Returns a copy with every vertex transformed by `f`, revalidated.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self, ValidationError> {
        Mesh::new(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }

    /// Recenters on the area-weighted centroid and scales so the farthest
    /// vertex lies at distance 1. Returns the mesh, the applied scale, and
    /// the original center.
    pub fn normalize_to_unit_sphere(&self) -> Result<(Mesh, f64, Vec3)> {
        let (pts, scale, center) = normalize_points(&self.vertices, &self.triangles)?;
        let mesh = Mesh::new(pts, self.triangles.clone())?;
        Ok((mesh, scale, center))
    }

    /// Lumped-mass-weighted mean of `positions` (one row per vertex).
    pub fn center_of_mass(&self, positions: &VertexMap) -> Result<Vec<f64>> {
        if positions.rows() != self.num_vertices() {
            return Err(Error::shape("center_of_mass", self.num_vertices(), positions.rows()));
        }
        let dim = positions.dim();
        let mut acc = vec![0.0; dim];
        let mut total = 0.0;
        for (j, &m) in self.vertex_masses.iter().enumerate() {
            for (a, p) in acc.iter_mut().zip(positions.row(j)) {
                *a += m * p;
            }
            total += m;
        }
        Ok(acc.into_iter().map(|a| a / total).collect())
    }
}

/// Unit-sphere normalization of raw points sharing a mesh's connectivity.
///
/// The center is the area-weighted centroid of the triangles spanned by the
/// points themselves (plain vertex mean if they span no area), so it also
/// applies to predicted maps that are not valid meshes.
pub fn normalize_points(points: &[Vec3], triangles: &[[usize; 3]]) -> Result<(Vec<Vec3>, f64, Vec3)> {
    if points.is_empty() {
        return Err(ValidationError::Empty.into());
    }
    let mut acc = Vec3::zeros();
    let mut total = 0.0;
    for &[a, b, c] in triangles {
        let area = 0.5 * (points[b] - points[a]).cross(&(points[c] - points[a])).norm();
        acc += (points[a] + points[b] + points[c]) * (area / 3.0);
        total += area;
    }
    let center = if total > 0.0 {
        acc / total
    } else {
        points.iter().sum::<Vec3>() / points.len() as f64
    };
    let radius = points.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(ValidationError::ZeroExtent.into());
    }
    let scale = 1.0 / radius;
    let pts = points.iter().map(|p| (p - center) * scale).collect();
    Ok((pts, scale, center))
}

pub fn bounding_box_diagonal(points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

fn check_topology(n: usize, triangles: &[[usize; 3]]) -> Result<(), ValidationError> {
    // directed half-edge -> owning triangle
    let mut half_edges: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
    let mut undirected: HashMap<(usize, usize), u32> = HashMap::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let count = undirected.entry((a.min(b), a.max(b))).or_insert(0);
            *count += 1;
            if *count > 2 {
                return Err(ValidationError::NonManifoldEdge {
                    a: a.min(b),
                    b: a.max(b),
                });
            }
            if half_edges.insert((a, b), t).is_some() {
                return Err(ValidationError::InconsistentOrientation { a, b });
            }
        }
    }

    let mut incident = vec![Vec::new(); n];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }
    if let Some(v) = incident.iter().position(|i| i.is_empty()) {
        return Err(ValidationError::IsolatedVertex { vertex: v });
    }

    // each vertex's incident triangles must form one fan across shared edges
    for (v, tris) in incident.iter().enumerate() {
        let mut uf = UnionFind::new(tris.len());
        let local: HashMap<usize, usize> = tris.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        for (i, &t) in tris.iter().enumerate() {
            let tri = triangles[t];
            let k = tri.iter().position(|&x| x == v).unwrap();
            let next = tri[(k + 1) % 3];
            if let Some(&other) = half_edges.get(&(next, v)) {
                uf.union(i, local[&other]);
            }
        }
        if uf.count() > 1 {
            return Err(ValidationError::NonManifoldVertex { vertex: v });
        }
    }

    let mut uf = UnionFind::new(n);
    for tri in triangles {
        uf.union(tri[0], tri[1]);
        uf.union(tri[1], tri[2]);
    }
    let components = uf.count();
    if components != 1 {
        return Err(ValidationError::Disconnected { components });
    }
    Ok(())
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            sets: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
            self.sets -= 1;
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.sets
    }
}
