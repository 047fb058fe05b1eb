//! Remeshing used to probe triangulation independence: Loop subdivision,
//! shortest-edge decimation, and closest-point queries.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use jacfield::{Mesh, Vec3};

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// One step of Loop subdivision. Vertex `i` of the input stays vertex `i`
/// (at its smoothed position); edge points follow.
pub fn loop_subdivide(mesh: &Mesh) -> Mesh {
    let v = mesh.vertices();
    let tris = mesh.triangles();
    let mut opposite: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for t in tris {
        for k in 0..3 {
            opposite.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(t[(k + 2) % 3]);
        }
    }
    let neighbors = mesh.vertex_neighbors();
    let mut boundary_nbrs: Vec<Vec<usize>> = vec![Vec::new(); v.len()];
    for (&(a, b), opp) in &opposite {
        if opp.len() == 1 {
            boundary_nbrs[a].push(b);
            boundary_nbrs[b].push(a);
        }
    }
    let mut points: Vec<Vec3> = (0..v.len())
        .map(|i| {
            if boundary_nbrs[i].len() == 2 {
                v[i] * 0.75 + (v[boundary_nbrs[i][0]] + v[boundary_nbrs[i][1]]) * 0.125
            } else {
                let n = neighbors[i].len() as f64;
                let beta = if neighbors[i].len() == 3 { 3.0 / 16.0 } else { 3.0 / (8.0 * n) };
                let sum: Vec3 = neighbors[i].iter().map(|&j| v[j]).sum();
                v[i] * (1.0 - n * beta) + sum * beta
            }
        })
        .collect();
    let mut edge_point: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let sorted: BTreeMap<_, _> = opposite.iter().collect();
    for (&&(a, b), opp) in &sorted {
        let p = if opp.len() == 2 {
            (v[a] + v[b]) * 0.375 + (v[opp[0]] + v[opp[1]]) * 0.125
        } else {
            (v[a] + v[b]) * 0.5
        };
        edge_point.insert((a, b), points.len());
        points.push(p);
    }
    let mut out = Vec::with_capacity(tris.len() * 4);
    for t in tris {
        let m = |i: usize, j: usize| edge_point[&edge_key(t[i], t[j])];
        let (m01, m12, m20) = (m(0, 1), m(1, 2), m(2, 0));
        out.push([t[0], m01, m20]);
        out.push([t[1], m12, m01]);
        out.push([t[2], m20, m12]);
        out.push([m01, m12, m20]);
    }
    Mesh::new(points, out).expect("subdivision keeps the mesh valid")
}

fn normal(p: &[Vec3], t: &[usize; 3]) -> Vec3 {
    (p[t[1]] - p[t[0]]).cross(&(p[t[2]] - p[t[0]]))
}

/// Collapses shortest edges to their midpoints until at most
/// `target_triangles` remain. Collapses that would break the link
/// condition, tilt a triangle by more than 60 degrees, or shrink one below
/// a tenth of its area are skipped.
pub fn decimate(mesh: &Mesh, target_triangles: usize) -> Mesh {
    let mut pos = mesh.vertices().to_vec();
    let mut tris: Vec<Option<[usize; 3]>> = mesh.triangles().iter().map(|&t| Some(t)).collect();
    let mut incident: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); pos.len()];
    for (i, t) in mesh.triangles().iter().enumerate() {
        for &a in t {
            incident[a].insert(i);
        }
    }
    let mut alive = tris.len();
    loop {
        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for t in tris.iter().flatten() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a < b {
                    edges.push(((pos[a] - pos[b]).norm(), a, b));
                }
            }
        }
        edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut touched = vec![false; pos.len()];
        let mut collapsed = 0;
        for &(_, a, b) in &edges {
            if alive <= target_triangles {
                break;
            }
            if touched[a] || touched[b] {
                continue;
            }
            let ring = |x: usize| -> BTreeSet<usize> {
                incident[x].iter().flat_map(|&t| tris[t].unwrap()).filter(|&y| y != x).collect()
            };
            let (ra, rb) = (ring(a), ring(b));
            let shared: Vec<usize> = incident[a].intersection(&incident[b]).copied().collect();
            let common = ra.intersection(&rb).count();
            if shared.len() != 2 || common != 2 {
                continue;
            }
            let mid = (pos[a] + pos[b]) * 0.5;
            let mut moved = pos.clone();
            moved[a] = mid;
            moved[b] = mid;
            let ok = incident[a].union(&incident[b]).filter(|t| !shared.contains(t)).all(|&t| {
                let tri = tris[t].unwrap();
                let (n0, n1) = (normal(&pos, &tri), normal(&moved, &tri));
                n1.norm() > 0.1 * n0.norm() && n0.dot(&n1) > 0.5 * n0.norm() * n1.norm()
            });
            if !ok {
                continue;
            }
            for &t in &shared {
                for &x in &tris[t].unwrap() {
                    incident[x].remove(&t);
                }
                tris[t] = None;
            }
            let moving: Vec<usize> = incident[b].iter().copied().collect();
            for t in moving {
                let tri = tris[t].as_mut().unwrap();
                for x in tri.iter_mut() {
                    if *x == b {
                        *x = a;
                    }
                }
                incident[a].insert(t);
            }
            incident[b].clear();
            pos[a] = mid;
            alive -= 2;
            collapsed += 1;
            for x in ra.iter().chain(&rb).chain([&a, &b]) {
                touched[*x] = true;
            }
        }
        if alive <= target_triangles || collapsed == 0 {
            break;
        }
    }
    let mut remap = vec![usize::MAX; pos.len()];
    let mut points = Vec::new();
    let mut out = Vec::new();
    for t in tris.iter().flatten() {
        out.push(t.map(|x| {
            if remap[x] == usize::MAX {
                remap[x] = points.len();
                points.push(pos[x]);
            }
            remap[x]
        }));
    }
    Mesh::new(points, out).expect("decimation keeps the mesh valid")
}

/// Closest point on triangle `abc` to `p`, as barycentric weights.
pub fn closest_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> [f64; 3] {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let (v, w) = (vb * denom, vc * denom);
    [1.0 - v - w, v, w]
}

/// For each query point, the triangle of `mesh` holding its closest surface
/// point and the barycentric weights there.
pub fn closest_points(mesh: &Mesh, queries: &[Vec3]) -> Vec<(usize, [f64; 3])> {
    let v = mesh.vertices();
    queries
        .iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0, [1.0, 0.0, 0.0]);
            for (i, t) in mesh.triangles().iter().enumerate() {
                let w = closest_barycentric(q, &v[t[0]], &v[t[1]], &v[t[2]]);
                let p = v[t[0]] * w[0] + v[t[1]] * w[1] + v[t[2]] * w[2];
                let d = (p - q).norm_squared();
                if d < best.0 {
                    best = (d, i, w);
                }
            }
            (best.1, best.2)
        })
        .collect()
}
