//! Vertex layouts and OBJ export for viewing maps in external tools.
//! Coordinates are for looking at, nothing is computed from them.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stableq_core::{MapGraph, QuadMap};

use crate::persist::fmt_real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Layout {
    /// Barycentric embedding with the root face as the outer boundary.
    #[default]
    Tutte,
    /// Force-directed layout in 3D.
    Spring,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutOptions {
    pub max_iterations: usize,
    /// Largest per-sweep displacement accepted as converged.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self { max_iterations: 5000, tolerance: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub positions: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 4]>,
    pub iterations: usize,
    /// False when the layout hit its iteration budget first.
    pub converged: bool,
}

/// Vertices around each face, in face-traversal order.
pub fn quad_faces(q: &QuadMap) -> Vec<[u32; 4]> {
    q.faces()
        .into_iter()
        .filter(|f| f.len() == 4)
        .map(|f| {
            let mut out = [0u32; 4];
            for (k, &h) in f.iter().enumerate() {
                out[k] = q.origin(h as usize) as u32;
            }
            out
        })
        .collect()
}

fn root_face_vertices(q: &QuadMap) -> Vec<u32> {
    let mut ring = Vec::new();
    let start = q.root_half_edge();
    let mut h = start;
    loop {
        let v = q.origin(h) as u32;
        if !ring.contains(&v) {
            ring.push(v);
        }
        h = q.next_in_face(h);
        if h == start {
            break;
        }
    }
    ring
}

/// Gauss-Seidel iteration of the barycentric equations, outer face pinned
/// to the unit circle.
pub fn tutte_layout(q: &QuadMap, opts: &LayoutOptions) -> (Vec<[f64; 3]>, usize, bool) {
    let g = MapGraph::new(q);
    let v = g.n_vertices();
    let mut pos = vec![[0.0f64; 3]; v];
    let mut fixed = vec![false; v];
    let ring = root_face_vertices(q);
    for (k, &u) in ring.iter().enumerate() {
        let a = std::f64::consts::TAU * k as f64 / ring.len() as f64;
        pos[u as usize] = [a.cos(), a.sin(), 0.0];
        fixed[u as usize] = true;
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut moved = 0.0f64;
        for u in 0..v {
            let nb = g.neighbours(u);
            if fixed[u] || nb.is_empty() {
                continue;
            }
            let (mut x, mut y) = (0.0, 0.0);
            for &w in nb {
                x += pos[w as usize][0];
                y += pos[w as usize][1];
            }
            let (x, y) = (x / nb.len() as f64, y / nb.len() as f64);
            moved = moved.max((x - pos[u][0]).abs().max((y - pos[u][1]).abs()));
            pos[u] = [x, y, 0.0];
        }
        if moved < opts.tolerance {
            converged = true;
            break;
        }
    }
    (pos, iterations, converged)
}

type Cell = (i64, i64, i64);

fn cell_of(p: &[f64; 3], size: f64) -> Cell {
    ((p[0] / size).floor() as i64, (p[1] / size).floor() as i64, (p[2] / size).floor() as i64)
}

/// Fruchterman-Reingold in the unit cube with a fixed iteration budget and
/// linear cooling. Repulsion only acts within neighbouring grid cells.
pub fn spring_layout(q: &QuadMap, opts: &LayoutOptions) -> (Vec<[f64; 3]>, usize, bool) {
    let v = q.n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pos: Vec<[f64; 3]> =
        (0..v).map(|_| [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5]).collect();
    let k = (1.0 / v.max(1) as f64).cbrt();
    let size = 2.0 * k;
    let edges: Vec<(usize, usize)> = (0..q.n_half_edges())
        .filter(|&h| h < q.twin(h))
        .map(|h| (q.origin(h), q.origin(q.twin(h))))
        .collect();
    let t0 = 0.1;
    let mut disp = vec![[0.0f64; 3]; v];
    let mut moved = f64::INFINITY;
    let iterations = opts.max_iterations;
    for it in 0..iterations {
        let mut grid: HashMap<Cell, Vec<u32>> = HashMap::new();
        for (u, p) in pos.iter().enumerate() {
            grid.entry(cell_of(p, size)).or_default().push(u as u32);
        }
        for d in disp.iter_mut() {
            *d = [0.0; 3];
        }
        for u in 0..v {
            let (cx, cy, cz) = cell_of(&pos[u], size);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                        for &w in bucket {
                            let w = w as usize;
                            if w == u {
                                continue;
                            }
                            let delta = [pos[u][0] - pos[w][0], pos[u][1] - pos[w][1], pos[u][2] - pos[w][2]];
                            let dist = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt().max(1e-9);
                            if dist > size {
                                continue;
                            }
                            let f = k * k / dist;
                            for c in 0..3 {
                                disp[u][c] += delta[c] / dist * f;
                            }
                        }
                    }
                }
            }
        }
        for &(a, b) in &edges {
            if a == b {
                continue;
            }
            let delta = [pos[a][0] - pos[b][0], pos[a][1] - pos[b][1], pos[a][2] - pos[b][2]];
            let dist = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt().max(1e-9);
            let f = dist * dist / k;
            for c in 0..3 {
                disp[a][c] -= delta[c] / dist * f;
                disp[b][c] += delta[c] / dist * f;
            }
        }
        let temp = t0 * (1.0 - it as f64 / iterations as f64);
        moved = 0.0;
        for u in 0..v {
            let d = disp[u];
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if len == 0.0 {
                continue;
            }
            let step = len.min(temp);
            for c in 0..3 {
                pos[u][c] += d[c] / len * step;
            }
            moved = moved.max(step);
        }
    }
    (pos, iterations, moved < opts.tolerance)
}

pub fn export_mesh(q: &QuadMap, layout: Layout, opts: &LayoutOptions) -> Mesh {
    let (positions, iterations, converged) = match layout {
        Layout::Tutte => tutte_layout(q, opts),
        Layout::Spring => spring_layout(q, opts),
    };
    Mesh { positions, faces: quad_faces(q), iterations, converged }
}

pub fn write_obj<W: Write>(w: &mut W, mesh: &Mesh) -> io::Result<()> {
    writeln!(w, "# {} vertices, {} quadrangles", mesh.positions.len(), mesh.faces.len())?;
    for p in &mesh.positions {
        writeln!(w, "v {} {} {}", fmt_real(p[0]), fmt_real(p[1]), fmt_real(p[2]))?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1)?;
    }
    Ok(())
}
