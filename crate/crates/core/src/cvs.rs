//! The reverse Cori–Vauquelin–Schaeffer construction.
//!
//! A labelled tree with `n` edges and a sign `ε` are turned into a pointed,
//! rooted quadrangulation with `n` faces stored as a half-edge structure.
//!
//! Arc `i` joins corner `e_i` to its successor `s(e_i)`; it is made of the
//! half-edges `2i` (leaving `e_i`) and `2i + 1` (arriving at the successor).
//! Tree vertices keep their lexicographic ids `0..=n`; the pointed vertex
//! `v*` gets id `n + 1`.
//!
//! Rotation system: arcs never cross, so inside the sector of corner `c` the
//! arc ends are met, counterclockwise around the vertex, as
//!
//! 1. the incoming arcs, the one whose source corner is closest before `c`
//!    in contour order first (cyclically decreasing source index),
//! 2. then the outgoing arc of `c`.
//!
//! Sectors of a vertex follow each other counterclockwise in contour order.
//! The contour walks the tree's face clockwise, so around `v*` the arcs
//! appear counterclockwise in decreasing source-corner order. The face
//! oracle in [`validate_quadrangulation`] certifies this convention on every
//! input of [`enumerate_small`].

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::gwtree::{CornerSequence, LabelledTree, LukasiewiczExcursion, PlaneTree};
use crate::{Error, Result};

/// Successor of a corner with minimal label.
pub const INF: u32 = u32::MAX;

/// Rooting sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Epsilon {
    /// Root half-edge points from `s(e_0)` to `e_0`.
    Plus,
    /// Root half-edge points from `e_0` to `s(e_0)`.
    Minus,
}

impl Epsilon {
    pub fn from_sign(sign: i8) -> Option<Self> {
        match sign {
            1 => Some(Self::Plus),
            -1 => Some(Self::Minus),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Self::Plus => 1,
            Self::Minus => -1,
        }
    }
}

/// `s(i)` for every corner, `INF` for corners of minimal label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessorTable {
    pub s: Vec<u32>,
}

impl SuccessorTable {
    pub fn get(&self, i: usize) -> Option<usize> {
        match self.s[i] {
            INF => None,
            j => Some(j as usize),
        }
    }
}

/// `s(i) = inf{j > i : ℓ(e_j) = ℓ(e_i) - 1}` over the periodically
/// extended contour, reduced mod `2n`.
///
/// One right-to-left sweep over the doubled sequence, remembering the next
/// position of every label level.
pub fn successor_table(corners: &CornerSequence) -> Result<SuccessorTable> {
    let m = corners.len();
    if m == 0 {
        return Err(Error::EmptyContour);
    }
    if corners.label.len() != m {
        return Err(Error::Coding("corner labels missing"));
    }
    let labels = &corners.label;
    for i in 0..m {
        if (labels[i] - labels[(i + 1) % m]).abs() > 1 {
            return Err(Error::Admissibility { vertex: corners.vertex[(i + 1) % m] as usize });
        }
    }
    let min = *labels.iter().min().expect("nonempty");
    let max = *labels.iter().max().expect("nonempty");
    let mut next_at = vec![INF; (max - min + 1) as usize];
    let mut s = vec![INF; m];
    for idx in (0..2 * m).rev() {
        let i = idx % m;
        let level = (labels[i] - min) as usize;
        if idx < m && level > 0 {
            let j = next_at[level - 1];
            debug_assert_ne!(j, INF);
            s[i] = j % m as u32;
        }
        next_at[level] = idx as u32;
    }
    Ok(SuccessorTable { s })
}

/// Pointed rooted quadrangulation as a half-edge structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadMap {
    n_faces: usize,
    n_vertices: usize,
    twin: Vec<u32>,
    /// Next half-edge counterclockwise around the common origin.
    next: Vec<u32>,
    origin: Vec<u32>,
    root: u32,
    pointed: u32,
    labels: Option<Vec<i32>>,
}

impl QuadMap {
    /// Assembles a map from raw arrays without checking anything; run
    /// [`validate_quadrangulation`] on the result.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        n_faces: usize,
        n_vertices: usize,
        twin: Vec<u32>,
        next: Vec<u32>,
        origin: Vec<u32>,
        root: u32,
        pointed: u32,
        labels: Option<Vec<i32>>,
    ) -> Self {
        Self { n_faces, n_vertices, twin, next, origin, root, pointed, labels }
    }

    pub fn n_faces(&self) -> usize {
        self.n_faces
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.twin.len() / 2
    }

    pub fn n_half_edges(&self) -> usize {
        self.twin.len()
    }

    pub fn twin(&self, h: usize) -> usize {
        self.twin[h] as usize
    }

    pub fn next(&self, h: usize) -> usize {
        self.next[h] as usize
    }

    pub fn origin(&self, h: usize) -> usize {
        self.origin[h] as usize
    }

    /// Half-edge following `h` along its face.
    pub fn next_in_face(&self, h: usize) -> usize {
        self.next[self.twin[h] as usize] as usize
    }

    pub fn root_half_edge(&self) -> usize {
        self.root as usize
    }

    /// Origin of the root half-edge.
    pub fn root_vertex(&self) -> usize {
        self.origin[self.root as usize] as usize
    }

    pub fn pointed_vertex(&self) -> usize {
        self.pointed as usize
    }

    /// Tree labels extended with `ℓ(v*) = min ℓ - 1`, when known.
    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn twins(&self) -> &[u32] {
        &self.twin
    }

    pub fn nexts(&self) -> &[u32] {
        &self.next
    }

    pub fn origins(&self) -> &[u32] {
        &self.origin
    }

    /// Degrees of all vertices (number of outgoing half-edges).
    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n_vertices];
        for &o in &self.origin {
            d[o as usize] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Faces as cycles of half-edges, each starting at its smallest half-edge.
    /// Assumes `twin` and `next` are permutations.
    pub fn faces(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.twin.len()];
        let mut faces = Vec::new();
        for start in 0..self.twin.len() {
            if seen[start] {
                continue;
            }
            let mut face = Vec::new();
            let mut h = start;
            while !seen[h] {
                seen[h] = true;
                face.push(h as u32);
                h = self.next_in_face(h);
            }
            faces.push(face);
        }
        faces
    }

    /// Mutable access for fault injection in tests and tools.
    pub fn twins_mut(&mut self) -> &mut [u32] {
        &mut self.twin
    }

    pub fn nexts_mut(&mut self) -> &mut [u32] {
        &mut self.next
    }
}

/// `Φ((t, ℓ), ε)`.
pub fn build_quadrangulation(lt: &LabelledTree, epsilon: Epsilon) -> Result<QuadMap> {
    let n = lt.n_edges();
    let corners = lt.corners()?;
    let succ = successor_table(&corners)?;
    let m = corners.len();
    let n_vertices = n + 2;
    let pointed = (n + 1) as u32;

    let mut twin = vec![0u32; 2 * m];
    let mut origin = vec![0u32; 2 * m];
    let mut next = vec![0u32; 2 * m];
    for i in 0..m {
        let (out, inc) = (2 * i, 2 * i + 1);
        twin[out] = inc as u32;
        twin[inc] = out as u32;
        origin[out] = corners.vertex[i];
        origin[inc] = match succ.get(i) {
            Some(j) => corners.vertex[j],
            None => pointed,
        };
    }

    // Incoming arcs per target corner, sources in increasing order (CSR).
    let mut in_start = vec![0u32; m + 1];
    let mut star_sources = Vec::new();
    for i in 0..m {
        match succ.get(i) {
            Some(j) => in_start[j + 1] += 1,
            None => star_sources.push(i as u32),
        }
    }
    for c in 0..m {
        in_start[c + 1] += in_start[c];
    }
    let mut in_sources = vec![0u32; in_start[m] as usize];
    let mut fill = in_start.clone();
    for i in 0..m {
        if let Some(j) = succ.get(i) {
            in_sources[fill[j] as usize] = i as u32;
            fill[j] += 1;
        }
    }

    // Corners of every tree vertex in contour order (CSR).
    let mut vc_start = vec![0u32; n + 2];
    for &v in &corners.vertex {
        vc_start[v as usize + 1] += 1;
    }
    for v in 0..=n {
        vc_start[v + 1] += vc_start[v];
    }
    let mut vc = vec![0u32; m];
    let mut fill = vc_start.clone();
    for (i, &v) in corners.vertex.iter().enumerate() {
        vc[fill[v as usize] as usize] = i as u32;
        fill[v as usize] += 1;
    }

    let mut ring: Vec<u32> = Vec::new();
    let link = |ring: &[u32], next: &mut [u32]| {
        for k in 0..ring.len() {
            next[ring[k] as usize] = ring[(k + 1) % ring.len()];
        }
    };
    for v in 0..=n {
        ring.clear();
        for &c in &vc[vc_start[v] as usize..vc_start[v + 1] as usize] {
            let srcs = &in_sources[in_start[c as usize] as usize..in_start[c as usize + 1] as usize];
            // Sources before c, nearest first, then wrapped sources, nearest first.
            let split = srcs.partition_point(|&j| j < c);
            ring.extend(srcs[..split].iter().rev().map(|&j| 2 * j + 1));
            ring.extend(srcs[split..].iter().rev().map(|&j| 2 * j + 1));
            ring.push(2 * c);
        }
        link(&ring, &mut next);
    }
    ring.clear();
    ring.extend(star_sources.iter().rev().map(|&j| 2 * j + 1));
    link(&ring, &mut next);

    let root = match epsilon {
        Epsilon::Plus => 1,
        Epsilon::Minus => 0,
    };
    let min = lt.min_label();
    let mut labels = lt.labels().to_vec();
    labels.push(min - 1);

    let q = QuadMap { n_faces: n, n_vertices, twin, next, origin, root, pointed, labels: Some(labels) };

    // Face oracle: n faces, all of degree 4.
    let mut seen = vec![false; q.twin.len()];
    let mut faces = 0usize;
    for start in 0..q.twin.len() {
        if seen[start] {
            continue;
        }
        let mut h = start;
        let mut len = 0;
        while !seen[h] {
            seen[h] = true;
            len += 1;
            h = q.next_in_face(h);
        }
        if len != 4 {
            return Err(Error::Internal("face of degree other than 4"));
        }
        faces += 1;
    }
    if faces != n {
        return Err(Error::Internal("wrong number of faces"));
    }
    Ok(q)
}

/// Outcome of one structural check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(CheckResult { name, passed, detail });
    }

    fn skip(&mut self, name: &'static str) {
        self.push(name, false, String::from("not evaluated: structure malformed"));
    }
}

/// Names of all checks, in report order.
pub const CHECK_NAMES: [&str; 12] = [
    "array_lengths",
    "twin_involution",
    "rotation_permutation",
    "rotation_origin",
    "vertex_count",
    "edge_count",
    "face_count",
    "face_degree",
    "euler_characteristic",
    "connected",
    "root_and_pointed",
    "label_edges",
];

/// Runs every structural check; failures are report entries, never errors.
pub fn validate_quadrangulation(q: &QuadMap) -> ValidationReport {
    let mut r = ValidationReport::default();
    let h_count = q.twin.len();
    let v_count = q.n_vertices;
    let n = q.n_faces;

    let lengths_ok = q.next.len() == h_count && q.origin.len() == h_count && h_count % 2 == 0;
    r.push(
        "array_lengths",
        lengths_ok,
        format!("twin {} next {} origin {}", h_count, q.next.len(), q.origin.len()),
    );
    if !lengths_ok {
        for name in &CHECK_NAMES[1..] {
            r.skip(name);
        }
        return r;
    }

    let bad_twin = (0..h_count).find(|&h| {
        let t = q.twin[h] as usize;
        t >= h_count || t == h || q.twin[t] as usize != h
    });
    r.push(
        "twin_involution",
        bad_twin.is_none(),
        match bad_twin {
            Some(h) => format!("half-edge {h} has twin {}", q.twin[h]),
            None => String::new(),
        },
    );

    let mut hit = vec![false; h_count];
    let mut perm_ok = true;
    for &x in &q.next {
        let x = x as usize;
        if x >= h_count || hit[x] {
            perm_ok = false;
            break;
        }
        hit[x] = true;
    }
    r.push("rotation_permutation", perm_ok, String::new());

    let origin_in_range = q.origin.iter().all(|&o| (o as usize) < v_count);
    let structural = bad_twin.is_none() && perm_ok && origin_in_range;

    if perm_ok && origin_in_range {
        // Each vertex's half-edges must form exactly one rotation cycle.
        let mut cycles_at = vec![0u32; v_count];
        let mut seen = vec![false; h_count];
        let mut same_origin = true;
        for start in 0..h_count {
            if seen[start] {
                continue;
            }
            cycles_at[q.origin[start] as usize] += 1;
            let mut h = start;
            while !seen[h] {
                seen[h] = true;
                if q.origin[h] != q.origin[start] {
                    same_origin = false;
                }
                h = q.next[h] as usize;
            }
        }
        let one_cycle = cycles_at.iter().all(|&c| c == 1);
        r.push(
            "rotation_origin",
            same_origin && one_cycle,
            format!("same origin along cycles: {same_origin}, one cycle per vertex: {one_cycle}"),
        );
    } else {
        r.push("rotation_origin", false, String::from("origin out of range or rotation not a permutation"));
    }

    r.push("vertex_count", v_count == n + 2, format!("V = {v_count}, n = {n}"));
    r.push("edge_count", h_count / 2 == 2 * n, format!("E = {}, n = {n}", h_count / 2));

    if !structural {
        for name in &CHECK_NAMES[6..] {
            r.skip(name);
        }
        return r;
    }

    let faces = q.faces();
    r.push("face_count", faces.len() == n, format!("F = {}", faces.len()));
    let bad_face = faces.iter().position(|f| f.len() != 4);
    r.push(
        "face_degree",
        bad_face.is_none(),
        match bad_face {
            Some(i) => format!("face {i} has degree {}", faces[i].len()),
            None => String::new(),
        },
    );
    let chi = v_count as i64 - (h_count / 2) as i64 + faces.len() as i64;
    r.push("euler_characteristic", chi == 2, format!("V - E + F = {chi}"));

    let mut adj_start = vec![0usize; v_count + 1];
    for &o in &q.origin {
        adj_start[o as usize + 1] += 1;
    }
    for v in 0..v_count {
        adj_start[v + 1] += adj_start[v];
    }
    let mut adj = vec![0u32; h_count];
    let mut fill = adj_start.clone();
    for h in 0..h_count {
        let o = q.origin[h] as usize;
        adj[fill[o]] = q.origin[q.twin[h] as usize];
        fill[o] += 1;
    }
    let mut reached = vec![false; v_count];
    let mut queue = VecDeque::new();
    let mut count = 0;
    if v_count > 0 {
        reached[0] = true;
        queue.push_back(0usize);
    }
    while let Some(v) = queue.pop_front() {
        count += 1;
        for &w in &adj[adj_start[v]..adj_start[v + 1]] {
            if !reached[w as usize] {
                reached[w as usize] = true;
                queue.push_back(w as usize);
            }
        }
    }
    r.push("connected", count == v_count, format!("{count} of {v_count} vertices reached"));

    let rp_ok = (q.root as usize) < h_count && (q.pointed as usize) < v_count;
    r.push("root_and_pointed", rp_ok, format!("root {} pointed {}", q.root, q.pointed));

    match &q.labels {
        None => r.push("label_edges", true, String::from("no labels")),
        Some(l) if l.len() != v_count => r.push("label_edges", false, format!("{} labels for {v_count} vertices", l.len())),
        Some(l) => {
            let bad = (0..h_count).find(|&h| {
                let a = l[q.origin[h] as usize];
                let b = l[q.origin[q.twin[h] as usize] as usize];
                (a - b).abs() != 1
            });
            let min_at_pointed = l.iter().min() == Some(&l[q.pointed as usize]);
            r.push(
                "label_edges",
                bad.is_none() && min_at_pointed,
                match bad {
                    Some(h) => format!("edge of half-edge {h} joins labels differing by other than 1"),
                    None => format!("minimum at pointed vertex: {min_at_pointed}"),
                },
            );
        }
    }
    r
}

/// Complete invariant of a rooted pointed map under root- and
/// point-preserving isomorphism: half-edges are renumbered in breadth-first
/// order from the root following `next` then `twin`.
pub fn canonical_code(q: &QuadMap) -> Vec<u32> {
    let h_count = q.twin.len();
    let mut id = vec![u32::MAX; h_count];
    let mut order = Vec::with_capacity(h_count);
    if h_count == 0 {
        return Vec::new();
    }
    id[q.root as usize] = 0;
    order.push(q.root);
    let mut i = 0;
    while i < order.len() {
        let h = order[i] as usize;
        for g in [q.next[h], q.twin[h]] {
            if id[g as usize] == u32::MAX {
                id[g as usize] = order.len() as u32;
                order.push(g);
            }
        }
        i += 1;
    }
    let mut code = Vec::with_capacity(2 * order.len() + 2);
    code.push(order.len() as u32);
    for &h in &order {
        code.push(id[q.twin[h as usize] as usize]);
        code.push(id[q.next[h as usize] as usize]);
    }
    let pointed_id = (0..h_count)
        .filter(|&h| q.origin[h] == q.pointed)
        .map(|h| id[h])
        .min()
        .unwrap_or(u32::MAX);
    code.push(pointed_id);
    code
}

/// All plane trees with `n` edges, as lexicographic offspring sequences.
pub fn plane_trees(n: usize) -> Vec<PlaneTree> {
    fn rec(pos: usize, len: usize, x: i64, prefix: &mut Vec<i32>, out: &mut Vec<PlaneTree>) {
        if pos == len {
            if x == -1 {
                let exc = LukasiewiczExcursion::from_increments(prefix.clone()).expect("valid by construction");
                out.push(crate::gwtree::tree_from_lukasiewicz(&exc).expect("valid by construction"));
            }
            return;
        }
        let remaining = (len - pos) as i64;
        for inc in -1..=(remaining - 1 - x) {
            let nx = x + inc;
            if nx < 0 && pos + 1 < len {
                continue;
            }
            prefix.push(inc as i32);
            rec(pos + 1, len, nx, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n + 1, 0, &mut Vec::new(), &mut out);
    out
}

/// One input `((t, ℓ), ε)` and its image.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub tree: LabelledTree,
    pub epsilon: Epsilon,
    pub map: QuadMap,
}

/// Every `((t, ℓ), ε)` with `n` edges and its image under `Φ`:
/// `Cat(n) · 3^n · 2` items.
pub fn enumerate_small(n: usize) -> Result<Vec<Enumerated>> {
    if n == 0 || n > 6 {
        return Err(Error::Domain("enumeration supports 1 <= n <= 6"));
    }
    let mut out = Vec::new();
    for tree in plane_trees(n) {
        let combos = 3usize.pow(n as u32);
        for code in 0..combos {
            let mut labels = vec![0i32; n + 1];
            let mut c = code;
            for v in 1..=n {
                let y = (c % 3) as i32 - 1;
                c /= 3;
                labels[v] = labels[tree.parent(v).expect("non-root")] + y;
            }
            let lt = LabelledTree::new(tree.clone(), labels)?;
            for epsilon in [Epsilon::Plus, Epsilon::Minus] {
                let map = build_quadrangulation(&lt, epsilon)?;
                out.push(Enumerated { tree: lt.clone(), epsilon, map });
            }
        }
    }
    Ok(out)
}
