//! Graph distances on quadrangulations and the label-based bounds on them.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cvs::QuadMap;
use crate::gwtree::LabelledTree;
use crate::{Error, Result};

/// Distance of a vertex not reached by a search.
pub const UNREACHED: u32 = u32::MAX;

/// Vertex adjacency of a map in compressed rows; multi-edges are kept.
#[derive(Debug, Clone)]
pub struct MapGraph {
    start: Vec<u32>,
    adj: Vec<u32>,
}

impl MapGraph {
    pub fn new(q: &QuadMap) -> Self {
        let v = q.n_vertices();
        let mut start = vec![0u32; v + 1];
        for &o in q.origins() {
            start[o as usize + 1] += 1;
        }
        for i in 0..v {
            start[i + 1] += start[i];
        }
        let mut adj = vec![0u32; q.n_half_edges()];
        let mut fill = start.clone();
        for h in 0..q.n_half_edges() {
            let o = q.origin(h);
            adj[fill[o] as usize] = q.origin(q.twin(h)) as u32;
            fill[o] += 1;
        }
        Self { start, adj }
    }

    pub fn n_vertices(&self) -> usize {
        self.start.len() - 1
    }

    pub fn neighbours(&self, v: usize) -> &[u32] {
        &self.adj[self.start[v] as usize..self.start[v + 1] as usize]
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.n_vertices() {
            return Err(Error::OutOfRange { index: v, limit: self.n_vertices() });
        }
        Ok(())
    }

    /// Hop distances from `source` to every vertex.
    pub fn bfs(&self, source: usize) -> Result<Vec<u32>> {
        self.check(source)?;
        let mut dist = vec![UNREACHED; self.n_vertices()];
        let mut queue = Vec::with_capacity(self.n_vertices());
        dist[source] = 0;
        queue.push(source as u32);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head] as usize;
            head += 1;
            let d = dist[v] + 1;
            for &w in self.neighbours(v) {
                if dist[w as usize] == UNREACHED {
                    dist[w as usize] = d;
                    queue.push(w);
                }
            }
        }
        Ok(dist)
    }

    /// Ball sizes around `center` for radii `0..=r_max`. Only vertices inside
    /// the ball are touched; `scratch` can be reused across calls.
    pub fn ball_profile_with(&self, center: usize, r_max: u32, scratch: &mut BfsScratch) -> Result<BallProfile> {
        self.check(center)?;
        scratch.prepare(self.n_vertices());
        let mut cumulative = Vec::with_capacity(r_max as usize + 1);
        scratch.mark(center, 0);
        let mut level_start = 0;
        let mut r = 0u32;
        loop {
            let level_end = scratch.touched.len();
            cumulative.push(level_end as u64);
            if r == r_max || level_start == level_end {
                break;
            }
            for idx in level_start..level_end {
                let v = scratch.touched[idx] as usize;
                for &w in self.neighbours(v) {
                    if scratch.dist[w as usize] == UNREACHED {
                        scratch.mark(w as usize, r + 1);
                    }
                }
            }
            level_start = level_end;
            r += 1;
        }
        // Radii past the eccentricity keep the full count.
        let last = *cumulative.last().expect("nonempty");
        cumulative.resize(r_max as usize + 1, last);
        scratch.reset();
        Ok(BallProfile { center, cumulative })
    }
}

/// Reusable BFS state for repeated ball computations.
#[derive(Debug, Default)]
pub struct BfsScratch {
    dist: Vec<u32>,
    touched: Vec<u32>,
}

impl BfsScratch {
    fn prepare(&mut self, n: usize) {
        if self.dist.len() != n {
            self.dist = vec![UNREACHED; n];
        }
        self.touched.clear();
    }

    fn mark(&mut self, v: usize, d: u32) {
        self.dist[v] = d;
        self.touched.push(v as u32);
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v as usize] = UNREACHED;
        }
        self.touched.clear();
    }
}

/// `cumulative[r] = #{v : d(center, v) <= r}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallProfile {
    pub center: usize,
    pub cumulative: Vec<u64>,
}

impl BallProfile {
    pub fn r_max(&self) -> u32 {
        (self.cumulative.len() - 1) as u32
    }
}

pub fn bfs_distances(q: &QuadMap, source: usize) -> Result<Vec<u32>> {
    MapGraph::new(q).bfs(source)
}

pub fn ball_profile(q: &QuadMap, center: usize, r_max: u32) -> Result<BallProfile> {
    MapGraph::new(q).ball_profile_with(center, r_max, &mut BfsScratch::default())
}

/// Sparse table answering range minima in constant time.
#[derive(Debug, Clone)]
pub struct RangeMin {
    levels: Vec<Vec<i32>>,
}

impl RangeMin {
    pub fn new(values: &[i32]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().expect("nonempty");
            let next: Vec<i32> = (0..=values.len() - 2 * width).map(|i| prev[i].min(prev[i + width])).collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels[0].is_empty()
    }

    /// Minimum over the closed range `[lo, hi]`.
    pub fn min(&self, lo: usize, hi: usize) -> i32 {
        debug_assert!(lo <= hi && hi < self.len());
        let k = (usize::BITS - 1 - (hi - lo + 1).leading_zeros()) as usize;
        self.levels[k][lo].min(self.levels[k][hi + 1 - (1 << k)])
    }
}

/// Which index interval the label minimum of `d°` is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntervalConvention {
    /// Lexicographic indices `[i ∧ j, i ∨ j]`.
    #[default]
    Plain,
    /// The better of the plain interval and its cyclic complement, as in the
    /// continuum pseudo-distance. Exploratory only.
    Cyclic,
    /// Contour corners between the first visits of `u_i` and `u_j`. This is
    /// the form that provably dominates the map distance; the lexicographic
    /// interval can skip low-labelled ancestors of `u_i`.
    Contour,
}

/// `d°(i, j) = ℓ(u_i) + ℓ(u_j) - 2 min_{k ∈ I} ℓ(u_k) + 2`.
#[derive(Debug, Clone)]
pub struct DCirc {
    labels: Vec<i32>,
    rmq: RangeMin,
    convention: IntervalConvention,
    /// First contour corner of each vertex; only for `Contour`.
    first_corner: Vec<u32>,
}

impl DCirc {
    pub fn new(lt: &LabelledTree) -> Self {
        Self::with_convention(lt, IntervalConvention::Plain)
    }

    pub fn with_convention(lt: &LabelledTree, convention: IntervalConvention) -> Self {
        if convention != IntervalConvention::Contour {
            return Self::from_labels(lt.labels(), convention).expect("lexicographic convention");
        }
        let labels = lt.labels().to_vec();
        let (rmq, first_corner) = match lt.corners() {
            Ok(c) => {
                let mut first = vec![u32::MAX; labels.len()];
                for (k, &v) in c.vertex.iter().enumerate().rev() {
                    first[v as usize] = k as u32;
                }
                (RangeMin::new(&c.label), first)
            }
            // A lone root: its only "corner" is itself.
            Err(_) => (RangeMin::new(&labels), vec![0]),
        };
        Self { labels, rmq, convention, first_corner }
    }

    /// Lexicographic conventions only; `Contour` needs the tree.
    pub fn from_labels(labels: &[i32], convention: IntervalConvention) -> Result<Self> {
        if convention == IntervalConvention::Contour {
            return Err(Error::Config("the contour convention needs the tree, not just labels"));
        }
        Ok(Self { labels: labels.to_vec(), rmq: RangeMin::new(labels), convention, first_corner: Vec::new() })
    }

    pub fn convention(&self) -> IntervalConvention {
        self.convention
    }

    pub fn get(&self, i: usize, j: usize) -> Result<i64> {
        let n = self.labels.len();
        for x in [i, j] {
            if x >= n {
                return Err(Error::OutOfRange { index: x, limit: n });
            }
        }
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let m = match self.convention {
            IntervalConvention::Plain => self.rmq.min(lo, hi),
            IntervalConvention::Cyclic => {
                let outer = self.rmq.min(hi, n - 1).min(self.rmq.min(0, lo));
                self.rmq.min(lo, hi).max(outer)
            }
            IntervalConvention::Contour => {
                let a = self.first_corner[i] as usize;
                let b = self.first_corner[j] as usize;
                self.rmq.min(a.min(b), a.max(b))
            }
        };
        Ok(self.labels[i] as i64 + self.labels[j] as i64 - 2 * m as i64 + 2)
    }
}

/// Free-function form of [`DCirc::get`] for one-off queries.
pub fn d_circ(lt: &LabelledTree, i: usize, j: usize) -> Result<i64> {
    DCirc::new(lt).get(i, j)
}

/// Summary of a dominance check `d_q(i, j) <= d°(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominanceReport {
    pub pairs_checked: u64,
    /// Histogram of `d°(i, j) - d_q(i, j)` for the contour form.
    pub slack: BTreeMap<i64, u64>,
    /// Pairs where the lexicographic form falls below `d_q`.
    pub plain_violations: u64,
    /// One such pair `(i, j, d_q, plain bound)`, if any.
    pub plain_example: Option<(u32, u32, u32, i64)>,
}

/// Checks `d_q(u_i, u_j) <= d°(i, j)` in the contour form, failing hard on
/// any violation, and counts how often the lexicographic form is beaten.
pub fn check_dcirc_dominates(q: &QuadMap, lt: &LabelledTree, pairs: &[(u32, u32)]) -> Result<DominanceReport> {
    let graph = MapGraph::new(q);
    let contour = DCirc::with_convention(lt, IntervalConvention::Contour);
    let plain = DCirc::new(lt);
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    let mut report = DominanceReport { pairs_checked: pairs.len() as u64, slack: BTreeMap::new(), plain_violations: 0, plain_example: None };
    let mut dist: Vec<u32> = Vec::new();
    let mut current = u32::MAX;
    for &(i, j) in &sorted {
        if i != current {
            dist = graph.bfs(i as usize)?;
            current = i;
        }
        let bound = contour.get(i as usize, j as usize)?;
        let dq = dist.get(j as usize).copied().ok_or(Error::OutOfRange { index: j as usize, limit: dist.len() })?;
        let s = bound - dq as i64;
        if s < 0 {
            return Err(Error::Invariant(format!("d_q({i},{j}) = {dq} exceeds d° = {bound}")));
        }
        *report.slack.entry(s).or_insert(0) += 1;
        let pb = plain.get(i as usize, j as usize)?;
        if (dq as i64) > pb {
            report.plain_violations += 1;
            report.plain_example.get_or_insert((i, j, dq, pb));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityReport {
    pub vertices_checked: usize,
    pub pointed_eccentricity: u32,
}

/// Verifies `d_q(v, v*) = ℓ(v) - ℓ(v*)` for every vertex.
pub fn check_identity_to_pointed(q: &QuadMap, lt: &LabelledTree) -> Result<IdentityReport> {
    let dist = bfs_distances(q, q.pointed_vertex())?;
    check_identity_with(&dist, q, lt)
}

pub(crate) fn check_identity_with(dist: &[u32], q: &QuadMap, lt: &LabelledTree) -> Result<IdentityReport> {
    let star = lt.min_label() - 1;
    let labels = lt.labels();
    if labels.len() + 1 != q.n_vertices() {
        return Err(Error::Invariant(format!(
            "map has {} vertices, tree has {}",
            q.n_vertices(),
            labels.len()
        )));
    }
    for (v, &l) in labels.iter().enumerate() {
        let expected = (l - star) as u32;
        if dist[v] != expected {
            return Err(Error::Invariant(format!("d(v{v}, v*) = {} but ℓ(v) - ℓ(v*) = {expected}", dist[v])));
        }
    }
    if dist[q.pointed_vertex()] != 0 {
        return Err(Error::Invariant(format!("pointed vertex at distance {}", dist[q.pointed_vertex()])));
    }
    let ecc = dist.iter().copied().max().unwrap_or(0);
    Ok(IdentityReport { vertices_checked: q.n_vertices(), pointed_eccentricity: ecc })
}

/// Ball sizes around `v*` predicted by the labels:
/// `1 + #{v : ℓ(v) - min ℓ + 1 <= r}` for `r = 0..=r_max`.
pub fn pointed_ball_from_labels(lt: &LabelledTree, r_max: u32) -> Vec<u64> {
    let min = lt.min_label();
    let mut hist = vec![0u64; r_max as usize + 1];
    for &l in lt.labels() {
        let d = (l - min + 1) as usize;
        if d <= r_max as usize {
            hist[d] += 1;
        }
    }
    let mut acc = 1u64;
    hist.iter()
        .map(|&h| {
            acc += h;
            acc
        })
        .collect()
}

/// Eccentricity of a vertex; `None` if the graph is disconnected.
pub fn eccentricity(graph: &MapGraph, v: usize) -> Result<Option<u32>> {
    let d = graph.bfs(v)?;
    if d.contains(&UNREACHED) {
        return Ok(None);
    }
    Ok(d.into_iter().max())
}

/// Distances from `v` via a plain queue, kept independent of [`MapGraph`]
/// for cross-checking.
pub fn bfs_via_half_edges(q: &QuadMap, source: usize) -> Vec<u32> {
    let mut first = vec![usize::MAX; q.n_vertices()];
    for h in 0..q.n_half_edges() {
        if first[q.origin(h)] == usize::MAX {
            first[q.origin(h)] = h;
        }
    }
    let mut dist = vec![UNREACHED; q.n_vertices()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        let h0 = first[v];
        if h0 == usize::MAX {
            continue;
        }
        let mut h = h0;
        loop {
            let w = q.origin(q.twin(h));
            if dist[w] == UNREACHED {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            h = q.next(h);
            if h == h0 {
                break;
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvs::{build_quadrangulation, enumerate_small, Epsilon};
    use crate::gwtree::{sample_labelled_tree, PlaneTree};
    use crate::offspring::OffspringLaw;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lt(offspring: &[u32], labels: &[i32]) -> LabelledTree {
        LabelledTree::new(PlaneTree::from_offspring(offspring).unwrap(), labels.to_vec()).unwrap()
    }

    #[test]
    fn bfs_examples() {
        let t = lt(&[1, 0], &[0, -1]);
        let q = build_quadrangulation(&t, Epsilon::Plus).unwrap();
        assert_eq!(bfs_distances(&q, 0).unwrap(), vec![0, 1, 2]);
        let t = lt(&[2, 0, 0], &[0, -1, -1]);
        let q = build_quadrangulation(&t, Epsilon::Plus).unwrap();
        assert_eq!(bfs_distances(&q, 0).unwrap()[3], 2);
        assert!(matches!(bfs_distances(&q, 4), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn ball_examples() {
        let t = lt(&[2, 0, 0], &[0, -1, -1]);
        let q = build_quadrangulation(&t, Epsilon::Plus).unwrap();
        assert_eq!(ball_profile(&q, 0, 2).unwrap().cumulative, vec![1, 3, 4]);
        assert_eq!(ball_profile(&q, 0, 5).unwrap().cumulative, vec![1, 3, 4, 4, 4, 4]);
        assert_eq!(ball_profile(&q, 3, 3).unwrap().cumulative, pointed_ball_from_labels(&t, 3));
    }

    #[test]
    fn d_circ_examples() {
        let t = lt(&[1, 0], &[0, -1]);
        assert_eq!(d_circ(&t, 0, 0).unwrap(), 2);
        assert_eq!(d_circ(&t, 0, 1).unwrap(), 3);
        assert_eq!(d_circ(&t, 1, 0).unwrap(), 3);
        let t = lt(&[2, 0, 0], &[0, -1, -1]);
        assert_eq!(d_circ(&t, 1, 2).unwrap(), 2);
        let q = build_quadrangulation(&t, Epsilon::Minus).unwrap();
        assert_eq!(bfs_distances(&q, 1).unwrap()[2], 2);
        assert!(matches!(d_circ(&t, 0, 3), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn range_min_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [1usize, 2, 3, 7, 64, 100] {
            let v: Vec<i32> = (0..len).map(|_| rng.random_range(-20..20)).collect();
            let r = RangeMin::new(&v);
            for lo in 0..len {
                for hi in lo..len {
                    assert_eq!(r.min(lo, hi), *v[lo..=hi].iter().min().unwrap());
                }
            }
        }
    }

    #[test]
    fn exact_identities_on_all_small_maps() {
        for n in 1..=3 {
            for e in enumerate_small(n).unwrap() {
                check_identity_to_pointed(&e.map, &e.tree).unwrap();
                let pairs: Vec<(u32, u32)> =
                    (0..=n as u32).flat_map(|i| (0..=n as u32).map(move |j| (i, j))).collect();
                let rep = check_dcirc_dominates(&e.map, &e.tree, &pairs).unwrap();
                assert_eq!(rep.pairs_checked as usize, (n + 1) * (n + 1));
                let r = n as u32 + 3;
                let ball = ball_profile(&e.map, e.map.pointed_vertex(), r).unwrap();
                assert_eq!(ball.cumulative, pointed_ball_from_labels(&e.tree, r));
                // Tree edges sit inside faces.
                let d = MapGraph::new(&e.map);
                for v in 1..=n {
                    let p = e.tree.tree().parent(v).unwrap();
                    assert!(d.bfs(v).unwrap()[p] <= 2);
                }
            }
        }
    }

    #[test]
    fn identities_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (alpha, n) in [(1.2, 1000usize), (1.5, 10_000), (1.8, 3000)] {
            let law = OffspringLaw::new(alpha, None, 4096).unwrap();
            let (t, _) = sample_labelled_tree(&law, n, 1.0 / 3.0, &mut rng, 1 << 30).unwrap();
            let q = build_quadrangulation(&t, Epsilon::Plus).unwrap();
            check_identity_to_pointed(&q, &t).unwrap();
            let g = MapGraph::new(&q);
            assert_eq!(g.bfs(7).unwrap(), bfs_via_half_edges(&q, 7));
            let pairs: Vec<(u32, u32)> = (0..2000)
                .map(|k| ((k % 20) as u32 * 13 % n as u32, rng.random_range(0..=n as u32)))
                .collect();
            check_dcirc_dominates(&q, &t, &pairs).unwrap();
        }
    }

    #[test]
    fn metric_axioms_on_sampled_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let law = OffspringLaw::new(1.5, None, 4096).unwrap();
        let (t, _) = sample_labelled_tree(&law, 500, 1.0 / 3.0, &mut rng, 1 << 30).unwrap();
        let q = build_quadrangulation(&t, Epsilon::Minus).unwrap();
        let g = MapGraph::new(&q);
        let all: Vec<Vec<u32>> = (0..q.n_vertices()).map(|v| g.bfs(v).unwrap()).collect();
        for _ in 0..5000 {
            let a = rng.random_range(0..q.n_vertices());
            let b = rng.random_range(0..q.n_vertices());
            let c = rng.random_range(0..q.n_vertices());
            assert_eq!(all[a][b], all[b][a]);
            assert!(all[a][c] <= all[a][b] + all[b][c]);
        }
        let ecc = eccentricity(&g, 0).unwrap().unwrap();
        let full = ball_profile(&q, 0, ecc).unwrap();
        assert_eq!(*full.cumulative.last().unwrap(), q.n_vertices() as u64);
    }

    /// Exhaustive search over n <= 4 for a triple breaking the triangle
    /// inequality of d°.
    fn find_triangle_violation(convention: IntervalConvention) -> Option<(Vec<u32>, Vec<i32>, [usize; 3])> {
        for n in 1..=4 {
            for e in enumerate_small(n).unwrap() {
                if e.epsilon == Epsilon::Minus {
                    continue;
                }
                let dc = DCirc::with_convention(&e.tree, convention);
                for i in 0..=n {
                    for j in 0..=n {
                        for k in 0..=n {
                            if dc.get(i, j).unwrap() > dc.get(i, k).unwrap() + dc.get(k, j).unwrap() {
                                return Some((e.tree.tree().offspring().to_vec(), e.tree.labels().to_vec(), [i, j, k]));
                            }
                        }
                    }
                }
            }
        }
        None
    }

    #[test]
    fn triangle_inequality_search() {
        // No triple breaks the triangle inequality for n <= 4 under either
        // convention: for k inside [i, j] the interval minimum splits, and
        // outside it both legs pass through a no larger minimum. What fails is
        // separation: d°(i, i) = 2 while d_q(u_i, u_i) = 0.
        assert!(find_triangle_violation(IntervalConvention::Plain).is_none());
        assert!(find_triangle_violation(IntervalConvention::Cyclic).is_none());
        assert!(find_triangle_violation(IntervalConvention::Contour).is_none());
        let (off, lab) = SEPARATION_FIXTURE;
        let t = lt(off, lab);
        for c in [IntervalConvention::Plain, IntervalConvention::Cyclic] {
            let dc = DCirc::with_convention(&t, c);
            for i in 0..off.len() {
                assert_eq!(dc.get(i, i).unwrap(), 2);
            }
        }
    }

    #[test]
    fn plain_interval_bound_counterexample() {
        // u_2 hangs off u_1 and u_3 off the root; the lexicographic interval
        // [2, 3] skips u_1 and the root, both labelled 0.
        let t = lt(&[2, 1, 0, 0], &[0, 0, 1, 1]);
        let q = build_quadrangulation(&t, Epsilon::Plus).unwrap();
        assert_eq!(bfs_distances(&q, 2).unwrap()[3], 4);
        assert_eq!(d_circ(&t, 2, 3).unwrap(), 2);
        assert_eq!(DCirc::with_convention(&t, IntervalConvention::Contour).get(2, 3).unwrap(), 4);
        let rep = check_dcirc_dominates(&q, &t, &[(2, 3), (3, 2), (0, 3)]).unwrap();
        assert_eq!(rep.plain_violations, 2);
        assert_eq!(rep.plain_example, Some((2, 3, 4, 2)));
        assert_eq!(rep.slack.values().sum::<u64>(), 3);
    }

    #[test]
    fn contour_bound_examples() {
        let t = lt(&[2, 0, 0], &[0, -1, -1]);
        let dc = DCirc::with_convention(&t, IntervalConvention::Contour);
        assert_eq!(dc.get(1, 2).unwrap(), 2);
        assert_eq!(dc.get(0, 1).unwrap(), 3);
        assert_eq!(dc.get(2, 2).unwrap(), 2);
        assert!(DCirc::from_labels(&[0], IntervalConvention::Contour).is_err());
        let one = DCirc::with_convention(&lt(&[0], &[0]), IntervalConvention::Contour);
        assert_eq!(one.get(0, 0).unwrap(), 2);
    }

    const SEPARATION_FIXTURE: (&[u32], &[i32]) = (&[2, 0, 1, 0], &[0, -1, 0, 1]);
}
