//! Disk-shaped patches grown from a seed vertex.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result, ValidationError};
use crate::mesh::{Mesh, UnionFind, Vec3};

#[derive(PartialEq)]
struct Visit(f64, usize);

impl Eq for Visit {}

impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest edge-path distances from `seed`.
pub fn edge_distances(mesh: &Mesh, seed: usize) -> Vec<f64> {
    let nbrs = mesh.vertex_neighbors();
    let v = mesh.vertices();
    let mut dist = vec![f64::INFINITY; mesh.num_vertices()];
    let mut heap = BinaryHeap::new();
    dist[seed] = 0.0;
    heap.push(Visit(0.0, seed));
    while let Some(Visit(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        for &j in &nbrs[i] {
            let nd = d + (v[j] - v[i]).norm();
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Visit(nd, j));
            }
        }
    }
    dist
}

/// Triangles whose vertices all lie within `radius` of `seed`, reduced to
/// the largest edge-connected component and validated as a disk, then
/// rigidly aligned so its best-fit plane is `z = 0` with normals toward +z.
pub fn extract_disk_patch(mesh: &Mesh, seed: usize, radius: f64) -> Result<Mesh> {
    if seed >= mesh.num_vertices() {
        return Err(Error::Invalid(format!("seed vertex {seed} out of range")));
    }
    let dist = edge_distances(mesh, seed);
    let inside: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| mesh.triangles()[t].iter().all(|&v| dist[v] <= radius))
        .collect();
    if inside.is_empty() {
        return Err(ValidationError::Empty.into());
    }
    let tris = largest_edge_component(mesh, &inside);
    let mut remap = HashMap::new();
    let mut verts = Vec::new();
    let mut faces = Vec::with_capacity(tris.len());
    for &t in &tris {
        let mut f = [0; 3];
        for (k, &v) in mesh.triangles()[t].iter().enumerate() {
            f[k] = *remap.entry(v).or_insert_with(|| {
                verts.push(mesh.vertices()[v]);
                verts.len() - 1
            });
        }
        faces.push(f);
    }
    let patch = Mesh::new(verts, faces)?;
    patch.check_disk()?;
    align_to_plane(&patch)
}

fn largest_edge_component(mesh: &Mesh, tris: &[usize]) -> Vec<usize> {
    let mut uf = UnionFind::new(tris.len());
    let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (k, &t) in tris.iter().enumerate() {
        let f = mesh.triangles()[t];
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            match edge_owner.entry((a.min(b), a.max(b))) {
                std::collections::hash_map::Entry::Occupied(o) => uf.union(k, *o.get()),
                std::collections::hash_map::Entry::Vacant(v) => {
                    v.insert(k);
                }
            }
        }
    }
    let mut sizes = vec![0usize; tris.len()];
    for k in 0..tris.len() {
        sizes[uf.find(k)] += 1;
    }
    // ties go to the component containing the lowest triangle index
    let best = (0..tris.len()).max_by_key(|&k| (sizes[k], std::cmp::Reverse(k))).unwrap();
    (0..tris.len()).filter(|&k| uf.find(k) == best).map(|k| tris[k]).collect()
}

/// Rigidly moves a mesh so its area-weighted best-fit plane is `z = 0`
/// through the area centroid, with the mean normal along +z.
pub fn align_to_plane(mesh: &Mesh) -> Result<Mesh> {
    let c = mesh.area_centroid();
    let mut cov = Matrix3::<f64>::zeros();
    for (j, p) in mesh.vertices().iter().enumerate() {
        let d = p - c;
        cov += mesh.vertex_masses()[j] * d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut ex: Vec3 = eig.eigenvectors.column(order[0]).into();
    let mut ez: Vec3 = eig.eigenvectors.column(order[2]).into();
    let mean_normal: Vec3 = (0..mesh.num_triangles()).map(|i| mesh.normals()[i] * mesh.areas()[i]).sum();
    if ez.dot(&mean_normal) < 0.0 {
        ez = -ez;
    }
    ex -= ez * ez.dot(&ex);
    ex = ex.normalize();
    let ey = ez.cross(&ex);
    Ok(mesh.map_vertices(|p| {
        let d = p - c;
        Vec3::new(ex.dot(&d), ey.dot(&d), ez.dot(&d))
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn whole_closed_sphere_is_rejected() {
        let s = shapes::icosphere(2).unwrap();
        assert!(extract_disk_patch(&s, 0, 10.0).is_err());
    }

    #[test]
    fn small_sphere_cap_is_a_disk() {
        let s = shapes::icosphere(3).unwrap();
        let p = extract_disk_patch(&s, 5, 0.8).unwrap();
        assert_eq!(p.euler_characteristic(), 1);
        let mean_n: Vec3 = p.normals().iter().sum();
        assert!(mean_n.z > 0.0);
    }
}
