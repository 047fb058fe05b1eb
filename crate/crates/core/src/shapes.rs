//! Procedural meshes used as bundled test and demo shapes.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use crate::error::Result;
use crate::mesh::{Mesh, Vec3};

/// Unit icosphere after `level` rounds of 4-to-1 subdivision.
pub fn icosphere(level: usize) -> Result<Mesh> {
    let (v, t) = icosphere_raw(level);
    Ok(Mesh::new(v, t)?)
}

fn icosphere_raw(level: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1., p, 0.),
        (1., p, 0.),
        (-1., -p, 0.),
        (1., -p, 0.),
        (0., -1., p),
        (0., 1., p),
        (0., -1., -p),
        (0., 1., -p),
        (p, 0., -1.),
        (p, 0., 1.),
        (-p, 0., -1.),
        (-p, 0., 1.),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    (verts, tris)
}

/// Sphere of the given radius, as a subdivided icosahedron.
pub fn sphere(radius: f64, level: usize) -> Result<Mesh> {
    let (v, t) = icosphere_raw(level);
    Ok(Mesh::new(v.into_iter().map(|p| p * radius).collect(), t)?)
}

/// An elongated, lumpy closed body with a few protrusions, suited to
/// handle-driven deformation.
pub fn creature(level: usize) -> Result<Mesh> {
    let (v, t) = icosphere_raw(level);
    let lobes = [
        (Vec3::new(1.0, 0.0, 0.0), 0.55),
        (Vec3::new(-1.0, 0.0, 0.0), 0.45),
        (Vec3::new(0.3, 0.0, 1.0).normalize(), 0.3),
        (Vec3::new(0.0, 1.0, -0.3).normalize(), 0.25),
        (Vec3::new(0.0, -1.0, -0.3).normalize(), 0.25),
    ];
    let verts = v
        .into_iter()
        .map(|p| {
            let mut r = 1.0 + 0.04 * (5.0 * p.x).sin() * (4.0 * p.y).cos();
            for (dir, amp) in &lobes {
                r += amp * p.dot(dir).max(0.0).powi(6);
            }
            let q = p * r;
            Vec3::new(1.3 * q.x, 0.8 * q.y, 0.7 * q.z)
        })
        .collect();
    Ok(Mesh::new(verts, t)?)
}

/// Torus around the z axis; `nu` segments around the ring, `nv` around
/// the tube.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Result<Mesh> {
    let mut verts = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let w = TAU * j as f64 / nv as f64;
            let rr = major + minor * w.cos();
            verts.push(Vec3::new(rr * u.cos(), rr * u.sin(), minor * w.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    Ok(Mesh::new(verts, tris)?)
}

/// Open tube along z with `nu` segments around and `nv` rings along; its
/// two boundary loops make it an annulus.
pub fn cylinder(radius: f64, height: f64, nu: usize, nv: usize) -> Result<Mesh> {
    let (verts, tris) = tube(radius, height, nu, nv);
    Ok(Mesh::new(verts, tris)?)
}

fn tube(radius: f64, height: f64, nu: usize, nv: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut verts = Vec::with_capacity(nu * (nv + 1));
    for k in 0..=nv {
        let z = height * (k as f64 / nv as f64 - 0.5);
        for i in 0..nu {
            let u = TAU * i as f64 / nu as f64;
            verts.push(Vec3::new(radius * u.cos(), radius * u.sin(), z));
        }
    }
    let idx = |i: usize, k: usize| k * nu + i % nu;
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for k in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (idx(i, k), idx(i + 1, k), idx(i + 1, k + 1), idx(i, k + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    (verts, tris)
}

/// Closed bar along x: a tube capped by triangle fans at both ends.
pub fn bar(length: f64, radius: f64, nu: usize, nv: usize) -> Result<Mesh> {
    let (tube_verts, mut tris) = tube(radius, length, nu, nv);
    // rotate the tube axis from z onto x
    let mut verts: Vec<Vec3> = tube_verts.iter().map(|p| Vec3::new(p.z, p.x, p.y)).collect();
    let first = verts.len();
    verts.push(Vec3::new(-0.5 * length, 0.0, 0.0));
    verts.push(Vec3::new(0.5 * length, 0.0, 0.0));
    let top = nv * nu;
    for i in 0..nu {
        let j = (i + 1) % nu;
        tris.push([first, j, i]);
        tris.push([first + 1, top + i, top + j]);
    }
    Ok(Mesh::new(verts, tris)?)
}

/// Height field `z = amp · sin(freq·x) · cos(freq·y)` over `[-1, 1]²`,
/// an `n × n` quad grid split along alternating diagonals.
pub fn wavy_grid(n: usize, amp: f64, freq: f64) -> Result<Mesh> {
    grid_with(n, |x, y| amp * (freq * x).sin() * (freq * y).cos())
}

/// Flat `n × n` grid over `[0, 1]²`.
pub fn unit_square_grid(n: usize) -> Result<Mesh> {
    let (v, t) = grid_raw(n, |_, _| 0.0);
    let v = v.into_iter().map(|p| Vec3::new(0.5 * (p.x + 1.0), 0.5 * (p.y + 1.0), p.z)).collect();
    Ok(Mesh::new(v, t)?)
}

fn grid_with(n: usize, height: impl Fn(f64, f64) -> f64) -> Result<Mesh> {
    let (v, t) = grid_raw(n, height);
    Ok(Mesh::new(v, t)?)
}

fn grid_raw(n: usize, height: impl Fn(f64, f64) -> f64) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let y = -1.0 + 2.0 * j as f64 / n as f64;
            verts.push(Vec3::new(x, y, height(x, y)));
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    (verts, tris)
}

/// Half of an open cylinder of the given radius: a developable disk.
pub fn half_cylinder(radius: f64, height: f64, nu: usize, nv: usize) -> Result<Mesh> {
    let mut verts = Vec::with_capacity((nu + 1) * (nv + 1));
    for k in 0..=nv {
        let z = height * (k as f64 / nv as f64 - 0.5);
        for i in 0..=nu {
            let u = PI * i as f64 / nu as f64;
            verts.push(Vec3::new(radius * u.cos(), radius * u.sin(), z));
        }
    }
    let idx = |i: usize, k: usize| k * (nu + 1) + i;
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for k in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (idx(i, k), idx(i + 1, k), idx(i + 1, k + 1), idx(i, k + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    Ok(Mesh::new(verts, tris)?)
}
