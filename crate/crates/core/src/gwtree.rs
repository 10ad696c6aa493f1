//! Conditioned Bienaymé–Galton–Watson trees, their codings and labels.
//!
//! Vertices are indexed `0..=n` in lexicographic (depth-first, left to
//! right) order, and every per-vertex array is aligned with that order.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::offspring::OffspringLaw;
use crate::{Error, Result};

/// Sentinel parent of the root.
pub const NO_PARENT: u32 = u32::MAX;

/// Łukasiewicz coding: increments `c(u_m) - 1` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LukasiewiczExcursion {
    increments: Vec<i32>,
}

impl LukasiewiczExcursion {
    /// Checks that the increments are `>= -1`, that the partial sums stay
    /// nonnegative and that the walk first hits `-1` at its last step.
    pub fn from_increments(increments: Vec<i32>) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::Coding("empty Łukasiewicz path"));
        }
        let last = increments.len() - 1;
        let mut x: i64 = 0;
        for (m, &inc) in increments.iter().enumerate() {
            if inc < -1 {
                return Err(Error::Coding("increment below -1"));
            }
            x += inc as i64;
            if m < last && x < 0 {
                return Err(Error::Coding("path hits -1 before its last step"));
            }
        }
        if x != -1 {
            return Err(Error::Coding("path does not end at -1"));
        }
        Ok(Self { increments })
    }

    pub fn increments(&self) -> &[i32] {
        &self.increments
    }

    /// Number of edges of the coded tree.
    pub fn n_edges(&self) -> usize {
        self.increments.len() - 1
    }

    /// `X(0), ..., X(n + 1)`, with `X(0) = 0` and `X(n + 1) = -1`.
    pub fn path(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut x = 0i64;
        out.push(x);
        for &inc in &self.increments {
            x += inc as i64;
            out.push(x);
        }
        out
    }

    pub fn offspring(&self) -> Vec<u32> {
        self.increments.iter().map(|&i| (i + 1) as u32).collect()
    }
}

/// Rooted plane tree with `n` edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneTree {
    offspring: Vec<u32>,
    parent: Vec<u32>,
    /// `children[child_start[v]..child_start[v + 1]]` lists the children of `v`.
    child_start: Vec<u32>,
    children: Vec<u32>,
    height: Vec<u32>,
}

impl PlaneTree {
    /// Tree whose lexicographic offspring sequence is `offspring`.
    pub fn from_offspring(offspring: &[u32]) -> Result<Self> {
        let increments = offspring.iter().map(|&c| c as i32 - 1).collect();
        tree_from_lukasiewicz(&LukasiewiczExcursion::from_increments(increments)?)
    }

    pub fn n_edges(&self) -> usize {
        self.offspring.len() - 1
    }

    pub fn n_vertices(&self) -> usize {
        self.offspring.len()
    }

    pub fn offspring(&self) -> &[u32] {
        &self.offspring
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    pub fn parents(&self) -> &[u32] {
        &self.parent
    }

    pub fn children(&self, v: usize) -> &[u32] {
        &self.children[self.child_start[v] as usize..self.child_start[v + 1] as usize]
    }

    /// `H(j) = |u_j|`.
    pub fn heights(&self) -> &[u32] {
        &self.height
    }

    pub fn max_offspring(&self) -> u32 {
        self.offspring.iter().copied().max().unwrap_or(0)
    }

    pub fn lukasiewicz(&self) -> LukasiewiczExcursion {
        LukasiewiczExcursion { increments: self.offspring.iter().map(|&c| c as i32 - 1).collect() }
    }
}

/// Result of the conditioned sampler.
#[derive(Debug, Clone)]
pub struct ConditionedSample {
    /// `n + 1` offspring counts summing to `n`.
    pub offspring: Vec<u32>,
    /// Number of trials used, including the accepted one.
    pub trials: u64,
}

/// How the `n + 1` i.i.d. offspring counts conditioned on summing to `n`
/// are produced. Both methods sample exactly the same law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConditioningMethod {
    /// Draw the counts one by one and reject as soon as the running sum
    /// exceeds `n`. Output is in draw order. Costs `O(n)` draws per trial.
    Sequential,
    /// Draw the value histogram `(N_0, N_1, ...)` of the `n + 1` counts as a
    /// multinomial vector through successive binomials, reject when
    /// `Σ k N_k != n`, then lay the accepted multiset out in uniformly random
    /// order. A trial costs a few hundred binomial draws instead of `n`.
    #[default]
    Multinomial,
}

/// Histogram levels are drawn by binomials until at most this many counts
/// remain; those are then drawn individually from the conditional tail.
const INDIVIDUAL_DRAW_THRESHOLD: u64 = 16;

/// `n + 1` i.i.d. draws from `law` conditioned on summing to `n`.
pub fn sample_conditioned_increments<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
    max_trials: u64,
) -> Result<ConditionedSample> {
    sample_conditioned_with(ConditioningMethod::default(), law, n, rng, max_trials)
}

pub fn sample_conditioned_with<R: Rng + ?Sized>(
    method: ConditioningMethod,
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
    max_trials: u64,
) -> Result<ConditionedSample> {
    if n < 1 {
        return Err(Error::Domain("tree size must be at least one edge"));
    }
    if max_trials < 1 {
        return Err(Error::Domain("max_trials must be at least 1"));
    }
    if n >= u32::MAX as usize {
        return Err(Error::Domain("tree size does not fit 32-bit vertex ids"));
    }
    // p(0) > 0 and p(k) > 0 for k >= 2, so only a single edge can be
    // impossible. There is one plane tree with one edge and every law that
    // reaches it returns it, so it is returned without sampling.
    if n == 1 && law.pmf(1) <= 1e-12 {
        return Ok(ConditionedSample { offspring: vec![1, 0], trials: 0 });
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut runs = Vec::new();
    for trial in 1..=max_trials {
        out.clear();
        runs.clear();
        let accepted = match method {
            ConditioningMethod::Sequential => sequential_trial(law, n as u64, rng, &mut out),
            ConditioningMethod::Multinomial => multinomial_trial(law, n as u64, rng, &mut runs),
        };
        if accepted {
            if method == ConditioningMethod::Multinomial {
                for &(k, count) in &runs {
                    out.extend(core::iter::repeat_n(k, count as usize));
                }
                out.shuffle(rng);
            }
            return Ok(ConditionedSample { offspring: out, trials: trial });
        }
    }
    Err(Error::SamplingBudget { trials: max_trials })
}

fn sequential_trial<R: Rng + ?Sized>(law: &OffspringLaw, n: u64, rng: &mut R, out: &mut Vec<u32>) -> bool {
    let mut sum = 0u64;
    for _ in 0..=n {
        let room = n - sum;
        let k = law.sample_at_least(0, room, rng);
        if k > room {
            return false;
        }
        sum += k;
        out.push(k as u32);
    }
    sum == n
}

/// One trial of the level-by-level multinomial draw. Counts go to `runs` as
/// `(value, multiplicity)`; expanding them is left to the caller, since most
/// trials are rejected.
fn multinomial_trial<R: Rng + ?Sized>(law: &OffspringLaw, n: u64, rng: &mut R, runs: &mut Vec<(u32, u64)>) -> bool {
    let mut remaining = n + 1;
    let mut weight = 0u64;
    let mut k = 0u64;
    while remaining > 0 {
        // Deep in the tail a few inversions beat walking many sparse levels.
        if remaining <= INDIVIDUAL_DRAW_THRESHOLD.max(k / 4) || k > law.k_cut() as u64 {
            for _ in 0..remaining {
                let room = n - weight;
                let v = law.sample_at_least(k, room, rng);
                if v > room {
                    return false;
                }
                weight += v;
                runs.push((v as u32, 1));
            }
            break;
        }
        let p = law.hazard(k).clamp(0.0, 1.0);
        let count = match Binomial::new(remaining, p) {
            Ok(b) => b.sample(rng),
            Err(_) => return false,
        };
        weight += k * count;
        if weight > n {
            return false;
        }
        if count > 0 {
            runs.push((k as u32, count));
        }
        remaining -= count;
        // Every count still to be drawn is at least k + 1.
        if remaining.saturating_mul(k + 1).saturating_add(weight) > n {
            return false;
        }
        k += 1;
    }
    weight == n
}

/// Rotates offspring counts summing to `len - 1` into a Łukasiewicz excursion.
///
/// The rotation starts right after the first index at which the partial sums
/// of `c - 1` attain their global minimum; the cycle lemma makes it the only
/// valid one.
pub fn cycle_shift_to_excursion(offspring: &[u32]) -> Result<LukasiewiczExcursion> {
    if offspring.is_empty() {
        return Err(Error::Coding("empty offspring vector"));
    }
    let total: u64 = offspring.iter().map(|&c| c as u64).sum();
    if total != offspring.len() as u64 - 1 {
        return Err(Error::Coding("offspring counts must sum to the vector length minus one"));
    }
    let mut x = 0i64;
    let mut min = i64::MAX;
    let mut argmin = 0usize;
    for (m, &c) in offspring.iter().enumerate() {
        x += c as i64 - 1;
        // strict: the rotation starts right after the first time the minimum is hit
        if x < min {
            min = x;
            argmin = m + 1;
        }
    }
    let start = argmin % offspring.len();
    let increments = offspring[start..]
        .iter()
        .chain(&offspring[..start])
        .map(|&c| c as i32 - 1)
        .collect();
    let exc = LukasiewiczExcursion { increments };
    debug_assert!(LukasiewiczExcursion::from_increments(exc.increments.clone()).is_ok());
    Ok(exc)
}

/// The plane tree coded by a Łukasiewicz excursion.
pub fn tree_from_lukasiewicz(exc: &LukasiewiczExcursion) -> Result<PlaneTree> {
    let n_vertices = exc.increments.len();
    let offspring: Vec<u32> = exc
        .increments
        .iter()
        .map(|&i| u32::try_from(i + 1).map_err(|_| Error::Coding("negative offspring count")))
        .collect::<Result<_>>()?;

    let mut child_start = Vec::with_capacity(n_vertices + 1);
    let mut acc = 0u32;
    child_start.push(0);
    for &c in &offspring {
        acc = acc.checked_add(c).ok_or(Error::Coding("offspring total overflows"))?;
        child_start.push(acc);
    }
    if acc as usize != n_vertices - 1 {
        return Err(Error::Coding("offspring counts do not sum to n"));
    }

    let mut parent = vec![NO_PARENT; n_vertices];
    let mut height = vec![0u32; n_vertices];
    let mut children = vec![0u32; n_vertices - 1];
    // Stack of (vertex, children not yet attached).
    let mut stack: Vec<(u32, u32)> = Vec::new();
    for m in 0..n_vertices {
        if m > 0 {
            let top = stack.last_mut().ok_or(Error::Coding("excursion returns to -1 early"))?;
            let p = top.0;
            let slot = child_start[p as usize + 1] - top.1;
            children[slot as usize] = m as u32;
            top.1 -= 1;
            if top.1 == 0 {
                stack.pop();
            }
            parent[m] = p;
            height[m] = height[p as usize] + 1;
        }
        if offspring[m] > 0 {
            stack.push((m as u32, offspring[m]));
        }
    }
    if !stack.is_empty() {
        return Err(Error::Coding("excursion does not return to -1"));
    }
    Ok(PlaneTree { offspring, parent, child_start, children, height })
}

/// Height process `H(j) = |u_j|`.
pub fn height_process(tree: &PlaneTree) -> Vec<u32> {
    tree.height.clone()
}

/// Corners of a tree in contour order.
///
/// `label` is empty for an unlabelled contour and has the same length as
/// `vertex` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerSequence {
    pub vertex: Vec<u32>,
    pub height: Vec<u32>,
    pub label: Vec<i32>,
}

impl CornerSequence {
    pub fn len(&self) -> usize {
        self.vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty()
    }
}

/// The `2n` corners `e_0, ..., e_{2n-1}` visited by the contour exploration,
/// starting at the root corner that precedes the root edge.
pub fn contour_exploration(tree: &PlaneTree) -> Result<CornerSequence> {
    let n = tree.n_edges();
    if n == 0 {
        return Err(Error::EmptyContour);
    }
    let mut vertex = Vec::with_capacity(2 * n + 1);
    let mut stack: Vec<(u32, u32)> = Vec::with_capacity(64);
    stack.push((0, 0));
    vertex.push(0u32);
    while let Some(&mut (v, ref mut next)) = stack.last_mut() {
        let kids = tree.children(v as usize);
        if (*next as usize) < kids.len() {
            let child = kids[*next as usize];
            *next += 1;
            stack.push((child, 0));
            vertex.push(child);
        } else {
            stack.pop();
            if let Some(&(p, _)) = stack.last() {
                vertex.push(p);
            }
        }
    }
    // The final return to the root is corner 2n = corner 0.
    vertex.pop();
    debug_assert_eq!(vertex.len(), 2 * n);
    let height = vertex.iter().map(|&v| tree.height[v as usize]).collect();
    Ok(CornerSequence { vertex, height, label: Vec::new() })
}

/// Plane tree with an admissible label function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledTree {
    tree: PlaneTree,
    labels: Vec<i32>,
}

impl LabelledTree {
    /// Requires `ℓ(root) = 0` and `|ℓ(v) - ℓ(parent(v))| <= 1`.
    pub fn new(tree: PlaneTree, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != tree.n_vertices() {
            return Err(Error::Coding("label count differs from vertex count"));
        }
        if labels[0] != 0 {
            return Err(Error::Admissibility { vertex: 0 });
        }
        for v in 1..tree.n_vertices() {
            let p = tree.parent[v] as usize;
            if (labels[v] - labels[p]).abs() > 1 {
                return Err(Error::Admissibility { vertex: v });
            }
        }
        Ok(Self { tree, labels })
    }

    pub fn tree(&self) -> &PlaneTree {
        &self.tree
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn n_edges(&self) -> usize {
        self.tree.n_edges()
    }

    pub fn min_label(&self) -> i32 {
        self.labels.iter().copied().min().unwrap_or(0)
    }

    /// Contour corners carrying the labels of their vertices.
    pub fn corners(&self) -> Result<CornerSequence> {
        let mut c = contour_exploration(&self.tree)?;
        c.label = c.vertex.iter().map(|&v| self.labels[v as usize]).collect();
        Ok(c)
    }

    pub fn into_parts(self) -> (PlaneTree, Vec<i32>) {
        (self.tree, self.labels)
    }
}

/// Labels `ℓ(v) = Σ_{u ⪯ v, u ≠ root} Y(u)` with i.i.d. increments,
/// `P(Y = 0) = p0` and `P(Y = 1) = P(Y = -1) = (1 - p0) / 2`.
pub fn assign_labels<R: Rng + ?Sized>(tree: PlaneTree, p0: f64, rng: &mut R) -> Result<LabelledTree> {
    if !(0.0..1.0).contains(&p0) {
        return Err(Error::Domain("p0 must lie in [0, 1)"));
    }
    let mut labels = vec![0i32; tree.n_vertices()];
    for v in 1..tree.n_vertices() {
        let y = if rng.random::<f64>() < p0 {
            0
        } else if rng.random::<bool>() {
            1
        } else {
            -1
        };
        labels[v] = labels[tree.parent[v] as usize] + y;
    }
    Ok(LabelledTree { tree, labels })
}

/// Conditioned tree with `n` edges plus its labels.
pub fn sample_labelled_tree<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    p0: f64,
    rng: &mut R,
    max_trials: u64,
) -> Result<(LabelledTree, u64)> {
    let draw = sample_conditioned_increments(law, n, rng, max_trials)?;
    let tree = tree_from_lukasiewicz(&cycle_shift_to_excursion(&draw.offspring)?)?;
    Ok((assign_labels(tree, p0, rng)?, draw.trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::DEFAULT_K_CUT;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// All offspring vectors of length `len` with entries summing to `total`.
    pub(crate) fn compositions(total: u32, len: usize) -> Vec<Vec<u32>> {
        fn rec(total: u32, len: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if len == 1 {
                prefix.push(total);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for first in 0..=total {
                prefix.push(first);
                rec(total - first, len - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(total, len, &mut Vec::new(), &mut out);
        out
    }

    /// H(m) = #{j < m : X(j) = min_{j <= k <= m} X(k)}, evaluated directly.
    fn height_oracle(exc: &LukasiewiczExcursion) -> Vec<u32> {
        let x = exc.path();
        let n = exc.n_edges();
        (0..=n)
            .map(|m| (0..m).filter(|&j| (j..=m).all(|k| x[k] >= x[j])).count() as u32)
            .collect()
    }

    fn valid_rotations(offspring: &[u32]) -> Vec<usize> {
        (0..offspring.len())
            .filter(|&s| {
                let inc: Vec<i32> =
                    offspring[s..].iter().chain(&offspring[..s]).map(|&c| c as i32 - 1).collect();
                LukasiewiczExcursion::from_increments(inc).is_ok()
            })
            .collect()
    }

    #[test]
    fn cycle_shift_examples() {
        let e = cycle_shift_to_excursion(&[0, 2, 0]).unwrap();
        assert_eq!(e.increments(), &[1, -1, -1]);
        let e = cycle_shift_to_excursion(&[2, 0, 0]).unwrap();
        assert_eq!(e.increments(), &[1, -1, -1]);
        assert!(cycle_shift_to_excursion(&[1, 1, 0]).is_ok());
        assert!(matches!(cycle_shift_to_excursion(&[1, 1, 1]), Err(Error::Coding(_))));
    }

    #[test]
    fn cycle_lemma_exhaustive_up_to_six() {
        for n in 1..=6u32 {
            for comp in compositions(n, n as usize + 1) {
                let valid = valid_rotations(&comp);
                assert_eq!(valid.len(), 1, "{comp:?}");
                let exc = cycle_shift_to_excursion(&comp).unwrap();
                let s = valid[0];
                let expected: Vec<i32> = comp[s..].iter().chain(&comp[..s]).map(|&c| c as i32 - 1).collect();
                assert_eq!(exc.increments(), &expected[..]);
            }
        }
    }

    #[test]
    fn small_trees() {
        let t = PlaneTree::from_offspring(&[2, 0, 0]).unwrap();
        assert_eq!(t.heights(), &[0, 1, 1]);
        assert_eq!(t.children(0), &[1, 2]);
        let t = PlaneTree::from_offspring(&[1, 1, 1, 0]).unwrap();
        assert_eq!(height_process(&t), vec![0, 1, 2, 3]);
        let t = PlaneTree::from_offspring(&[0]).unwrap();
        assert_eq!(t.n_vertices(), 1);
        assert!(matches!(contour_exploration(&t), Err(Error::EmptyContour)));
        assert!(PlaneTree::from_offspring(&[0, 1]).is_err());
        assert!(PlaneTree::from_offspring(&[1, 0, 1]).is_err());
    }

    #[test]
    fn contour_examples() {
        let t = PlaneTree::from_offspring(&[1, 0]).unwrap();
        assert_eq!(contour_exploration(&t).unwrap().height, vec![0, 1]);
        let t = PlaneTree::from_offspring(&[2, 0, 0]).unwrap();
        let c = contour_exploration(&t).unwrap();
        assert_eq!(c.height, vec![0, 1, 0, 1]);
        assert_eq!(c.vertex, vec![0, 1, 0, 2]);
    }

    fn check_codings(tree: &PlaneTree) {
        // Łukasiewicz round trip.
        let exc = tree.lukasiewicz();
        assert_eq!(&tree_from_lukasiewicz(&exc).unwrap(), tree);
        // Parent/height consistency.
        assert_eq!(tree.heights()[0], 0);
        for v in 1..tree.n_vertices() {
            let p = tree.parent(v).unwrap();
            assert!(p < v);
            assert_eq!(tree.heights()[v], tree.heights()[p] + 1);
        }
        let total: usize = (0..tree.n_vertices()).map(|v| tree.children(v).len()).sum();
        assert_eq!(total, tree.n_edges());
        if tree.n_edges() == 0 {
            return;
        }
        // Contour: ±1 steps, corner counts, first visits in lexicographic order.
        let c = contour_exploration(tree).unwrap();
        assert_eq!(c.len(), 2 * tree.n_edges());
        assert_eq!(c.vertex[0], 0);
        for i in 0..c.len() {
            let a = c.height[i] as i64;
            let b = c.height[(i + 1) % c.len()] as i64;
            assert_eq!((a - b).abs(), 1);
            assert_eq!(c.height[i], tree.heights()[c.vertex[i] as usize]);
        }
        let mut count = vec![0u32; tree.n_vertices()];
        let mut first = Vec::new();
        for &v in &c.vertex {
            if count[v as usize] == 0 {
                first.push(v);
            }
            count[v as usize] += 1;
        }
        assert_eq!(first, (0..tree.n_vertices() as u32).collect::<Vec<_>>());
        assert_eq!(count[0], tree.offspring()[0]);
        for v in 1..tree.n_vertices() {
            assert_eq!(count[v], tree.offspring()[v] + 1);
        }
    }

    #[test]
    fn codings_exhaustive_up_to_six() {
        for n in 0..=6u32 {
            let mut trees = 0;
            for comp in compositions(n, n as usize + 1) {
                let inc: Vec<i32> = comp.iter().map(|&c| c as i32 - 1).collect();
                if let Ok(exc) = LukasiewiczExcursion::from_increments(inc) {
                    let tree = tree_from_lukasiewicz(&exc).unwrap();
                    assert_eq!(tree.heights(), &height_oracle(&exc)[..]);
                    check_codings(&tree);
                    trees += 1;
                }
            }
            // Catalan numbers.
            assert_eq!(trees, [1, 1, 2, 5, 14, 42, 132][n as usize]);
        }
    }

    #[test]
    fn codings_on_random_trees() {
        let law = OffspringLaw::new(1.3, None, 1024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2usize, 5, 10, 37, 200, 1000, 10_000] {
            let draw = sample_conditioned_increments(&law, n, &mut rng, 1 << 30).unwrap();
            let exc = cycle_shift_to_excursion(&draw.offspring).unwrap();
            let tree = tree_from_lukasiewicz(&exc).unwrap();
            if n <= 10 {
                assert_eq!(tree.heights(), &height_oracle(&exc)[..]);
            }
            check_codings(&tree);
        }
    }

    /// Exact conditional law of the offspring vector for tiny n versus the
    /// empirical frequencies of both samplers.
    fn chi_square_conditioned(method: ConditioningMethod, n: u32, draws: usize, seed: u64) -> (f64, usize) {
        let law = OffspringLaw::new(1.5, Some(0.5), DEFAULT_K_CUT).unwrap();
        let comps = compositions(n, n as usize + 1);
        let weights: Vec<f64> =
            comps.iter().map(|c| c.iter().map(|&k| law.pmf(k as u64)).product()).collect();
        let z: f64 = weights.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
        for _ in 0..draws {
            let d = sample_conditioned_with(method, &law, n as usize, &mut rng, 1 << 20).unwrap();
            *counts.entry(d.offspring).or_default() += 1;
        }
        let mut chi2 = 0.0;
        for (c, w) in comps.iter().zip(&weights) {
            let e = w / z * draws as f64;
            let o = *counts.get(c).unwrap_or(&0) as f64;
            chi2 += (o - e) * (o - e) / e;
        }
        assert_eq!(counts.keys().filter(|k| !comps.contains(k)).count(), 0);
        (chi2, comps.len() - 1)
    }

    #[test]
    fn conditioned_vectors_match_exact_law() {
        // Upper 1e-3 quantiles: 5 dof -> 20.52, 19 dof -> 43.82.
        for method in [ConditioningMethod::Sequential, ConditioningMethod::Multinomial] {
            let (chi2, dof) = chi_square_conditioned(method, 2, 200_000, 1);
            assert_eq!(dof, 5);
            assert!(chi2 < 20.52, "{method:?} n=2 chi2={chi2}");
            let (chi2, dof) = chi_square_conditioned(method, 3, 200_000, 2);
            assert_eq!(dof, 19);
            assert!(chi2 < 43.82, "{method:?} n=3 chi2={chi2}");
        }
    }

    #[test]
    fn conditioned_trees_match_exact_law() {
        // Tree law ∝ Π p(c(v)) over all plane trees with n edges.
        let law = OffspringLaw::new(1.5, Some(0.5), DEFAULT_K_CUT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (n, crit) in [(2u32, 10.83), (3, 18.47)] {
            let trees: Vec<Vec<u32>> = compositions(n, n as usize + 1)
                .into_iter()
                .filter(|c| PlaneTree::from_offspring(c).is_ok())
                .collect();
            let weights: Vec<f64> =
                trees.iter().map(|c| c.iter().map(|&k| law.pmf(k as u64)).product()).collect();
            let z: f64 = weights.iter().sum();
            let draws = 200_000;
            let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
            for _ in 0..draws {
                let d = sample_conditioned_increments(&law, n as usize, &mut rng, 1 << 20).unwrap();
                let exc = cycle_shift_to_excursion(&d.offspring).unwrap();
                *counts.entry(exc.offspring()).or_default() += 1;
            }
            let chi2: f64 = trees
                .iter()
                .zip(&weights)
                .map(|(t, w)| {
                    let e = w / z * draws as f64;
                    let o = *counts.get(t).unwrap_or(&0) as f64;
                    (o - e) * (o - e) / e
                })
                .sum();
            // dof = Cat(n) - 1: 1 -> 10.83, 4 -> 18.47.
            assert!(chi2 < crit, "n={n} chi2={chi2}");
        }
    }

    #[test]
    fn acceptance_rate_scales_like_local_limit() {
        let law = OffspringLaw::new(1.5, None, DEFAULT_K_CUT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut scaled = Vec::new();
        for n in [1_000usize, 10_000, 100_000] {
            let reps = 60;
            let mut trials = 0u64;
            for _ in 0..reps {
                trials += sample_conditioned_increments(&law, n, &mut rng, 1 << 30).unwrap().trials;
            }
            let rate = reps as f64 / trials as f64;
            scaled.push(rate * libm::pow(n as f64, 1.0 / 1.5));
        }
        let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
        let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 2.0, "{scaled:?}");
    }

    #[test]
    fn sampling_budget_error() {
        let law = OffspringLaw::new(1.5, None, DEFAULT_K_CUT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = sample_conditioned_increments(&law, 100_000, &mut rng, 1);
        // One trial almost never succeeds at this size; either outcome must be well formed.
        match r {
            Err(Error::SamplingBudget { trials }) => assert_eq!(trials, 1),
            Ok(d) => assert_eq!(d.offspring.iter().map(|&c| c as usize).sum::<usize>(), 100_000),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn n_equals_one() {
        // With c_phi = 1/alpha the linear coefficient vanishes.
        let law = OffspringLaw::new(1.5, None, DEFAULT_K_CUT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = sample_conditioned_increments(&law, 1, &mut rng, 10).unwrap();
        assert_eq!((d.offspring, d.trials), (vec![1, 0], 0));
        let law = OffspringLaw::new(1.5, Some(0.5), DEFAULT_K_CUT).unwrap();
        for _ in 0..100 {
            let d = sample_conditioned_increments(&law, 1, &mut rng, 1 << 20).unwrap();
            assert!(d.offspring == vec![1, 0] || d.offspring == vec![0, 1]);
        }
    }

    #[test]
    fn label_increment_frequencies() {
        let law = OffspringLaw::new(1.5, None, DEFAULT_K_CUT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut counts = [0usize; 3];
        let mut edges = 0;
        while edges < 1_000_000 {
            let draw = sample_conditioned_increments(&law, 50_000, &mut rng, 1 << 30).unwrap();
            let tree = tree_from_lukasiewicz(&cycle_shift_to_excursion(&draw.offspring).unwrap()).unwrap();
            let lt = assign_labels(tree, 1.0 / 3.0, &mut rng).unwrap();
            for v in 1..lt.tree().n_vertices() {
                let p = lt.tree().parent(v).unwrap();
                let d = lt.labels()[v] - lt.labels()[p];
                assert!(d.abs() <= 1);
                counts[(d + 1) as usize] += 1;
            }
            edges += lt.n_edges();
        }
        for c in counts {
            let f = c as f64 / edges as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.002, "{f}");
        }
    }

    #[test]
    fn label_validation() {
        let t = PlaneTree::from_offspring(&[2, 0, 0]).unwrap();
        assert!(LabelledTree::new(t.clone(), vec![0, -1, 1]).is_ok());
        assert!(matches!(LabelledTree::new(t.clone(), vec![1, 0, 0]), Err(Error::Admissibility { vertex: 0 })));
        assert!(matches!(LabelledTree::new(t.clone(), vec![0, 2, 0]), Err(Error::Admissibility { vertex: 1 })));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(assign_labels(t.clone(), 1.0, &mut rng), Err(Error::Domain(_))));
        let lt = assign_labels(t, 0.0, &mut rng).unwrap();
        assert!(lt.labels()[1..].iter().all(|l| l.abs() == 1));
    }
}
