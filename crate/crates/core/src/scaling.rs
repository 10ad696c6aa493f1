//! Scaling statistics: per-replica measurements, log-log fits, and the
//! constants used to rescale tree codings.
//!
//! Everything here is sequential and deterministic given a seed. The
//! parallel harness that fans replicas out over threads lives in the
//! `stableq` crate.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cvs::{build_quadrangulation, Epsilon, QuadMap};
use crate::gwtree::{sample_labelled_tree, LabelledTree};
use crate::mapmetric::{check_identity_with, BfsScratch, MapGraph};
use crate::offspring::OffspringLaw;
use crate::special::gamma;
use crate::{Error, Result};

/// Ordinary least squares fit of `log y` against `log x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
    pub r_squared: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Domain("log-log fit needs at least 3 points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive coordinates"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log-log fit needs at least two distinct x values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| libm::pow(y - intercept - slope * x, 2.0)).sum();
    let sst: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let stderr = libm::sqrt(ssr / (n - 2.0) / sxx);
    let r_squared = if sst == 0.0 { 1.0 } else { 1.0 - ssr / sst };
    Ok(SlopeFit { slope, intercept, stderr, points: points.len(), r_squared })
}

/// Constants of the joint scaling limit of (Łukasiewicz, height, labels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescalingConstants {
    /// `C_α = (α - 1) / Γ(2 - α)`.
    pub c_alpha: f64,
    /// Tail constant `c` of the offspring law.
    pub c: f64,
    /// `c' = (c / C_α)^{1/α}`.
    pub c_prime: f64,
    /// Label increment variance `1 - p0`.
    pub sigma_y2: f64,
}

impl RescalingConstants {
    pub fn new(law: &OffspringLaw, p0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p0) {
            return Err(Error::Domain("p0 must lie in [0, 1)"));
        }
        let alpha = law.alpha();
        let c_alpha = (alpha - 1.0) / gamma(2.0 - alpha);
        let c = law.tail_constant();
        let c_prime = libm::pow(c / c_alpha, 1.0 / alpha);
        Ok(Self { c_alpha, c, c_prime, sigma_y2: 1.0 - p0 })
    }
}

/// Target exponents for a stable index `alpha`.
pub mod targets {
    /// Distances scale like `n^{(α-1)/(2α)}`.
    pub fn radius(alpha: f64) -> f64 {
        (alpha - 1.0) / (2.0 * alpha)
    }

    /// Volume growth exponent `2α/(α-1)`.
    pub fn volume(alpha: f64) -> f64 {
        2.0 * alpha / (alpha - 1.0)
    }

    /// Largest offspring scales like `n^{1/α}`.
    pub fn max_offspring(alpha: f64) -> f64 {
        1.0 / alpha
    }

    /// Reference (lower-bound) exponent of the ball-volume upper tail.
    pub fn voltail_reference(alpha: f64) -> f64 {
        -(alpha - 1.0)
    }

    /// Upper-bound exponent of the ball-volume upper tail.
    pub fn voltail_upper(alpha: f64) -> f64 {
        -(alpha - 1.0) / (2.0 * alpha)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean after dropping `fraction` of the values at each end.
pub fn trimmed_mean(values: &[f64], fraction: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = (fraction * v.len() as f64) as usize;
    let kept = &v[cut..v.len() - cut];
    if kept.is_empty() {
        return median(values);
    }
    mean(kept)
}

/// Where ball centers are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CenterPolicy {
    /// Uniform over all `n + 2` vertices.
    #[default]
    Uniform,
    /// The tree root `u_0`.
    Root,
    /// The pointed vertex `v*`.
    Pointed,
}

/// One sampled map and the labelled tree it came from.
#[derive(Debug, Clone)]
pub struct SampledMap {
    pub tree: LabelledTree,
    pub epsilon: Epsilon,
    pub map: QuadMap,
    pub trials: u64,
}

impl SampledMap {
    /// `d(u_0, v*) = 1 - min ℓ`, read off the labels.
    pub fn root_to_pointed(&self) -> u32 {
        (1 - self.tree.min_label()) as u32
    }
}

/// Parameters shared by all replicas of a run.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub law: OffspringLaw,
    pub p0: f64,
    /// `None` draws ε with a fair coin from the replica stream.
    pub epsilon: Option<Epsilon>,
    pub max_trials: u64,
}

impl ModelParams {
    pub fn new(law: OffspringLaw, p0: f64) -> Self {
        Self { law, p0, epsilon: None, max_trials: DEFAULT_MAX_TRIALS }
    }
}

/// Trial budget of the conditioned sampler.
pub const DEFAULT_MAX_TRIALS: u64 = 1 << 40;

/// The replica generator for `seed`.
pub fn replica_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Samples `(T_n, ℓ_n, ε_n)` and builds its quadrangulation.
pub fn sample_map<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Result<SampledMap> {
    let (tree, trials) = sample_labelled_tree(&params.law, n, params.p0, rng, params.max_trials)?;
    let epsilon = match params.epsilon {
        Some(e) => e,
        None if rng.random::<bool>() => Epsilon::Plus,
        None => Epsilon::Minus,
    };
    let map = build_quadrangulation(&tree, epsilon)?;
    Ok(SampledMap { tree, epsilon, map, trials })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusRecord {
    pub n: usize,
    pub replica: u64,
    pub seed: u64,
    /// `d(u_0, v*)` from the labels.
    pub distance: u32,
    /// Same distance by BFS, for audited replicas.
    pub bfs_distance: Option<u32>,
    /// Distance from the origin of the root half-edge to `v*`.
    pub map_root_distance: u32,
}

/// One radius replica. With `audit` the label identity is checked against a
/// BFS from `v*` over the whole map.
pub fn radius_replica(params: &ModelParams, n: usize, replica: u64, seed: u64, audit: bool) -> Result<RadiusRecord> {
    let mut rng = replica_rng(seed);
    let s = sample_map(params, n, &mut rng)?;
    let star = s.tree.min_label() - 1;
    let labels = s.map.labels().expect("built maps carry labels");
    let map_root_distance = (labels[s.map.root_vertex()] - star) as u32;
    let bfs_distance = if audit {
        let dist = MapGraph::new(&s.map).bfs(s.map.pointed_vertex())?;
        check_identity_with(&dist, &s.map, &s.tree)?;
        Some(dist[0])
    } else {
        None
    };
    Ok(RadiusRecord { n, replica, seed, distance: s.root_to_pointed(), bfs_distance, map_root_distance })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxDegreeRecord {
    pub n: usize,
    pub replica: u64,
    pub seed: u64,
    pub tree_max_offspring: u32,
    pub map_max_degree: u32,
}

pub fn maxdegree_replica(params: &ModelParams, n: usize, replica: u64, seed: u64) -> Result<MaxDegreeRecord> {
    let mut rng = replica_rng(seed);
    let s = sample_map(params, n, &mut rng)?;
    Ok(MaxDegreeRecord {
        n,
        replica,
        seed,
        tree_max_offspring: s.tree.tree().max_offspring(),
        map_max_degree: s.map.max_degree(),
    })
}

/// Ball profiles of one map.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRecord {
    pub replica: u64,
    pub seed: u64,
    pub n: usize,
    /// `d(u_0, v*)`.
    pub root_to_pointed: u32,
    pub centers: Vec<usize>,
    /// `profiles[c][r]`, radii `0..=r_max`.
    pub profiles: Vec<Vec<u64>>,
    /// Profile around `v*`.
    pub pointed_profile: Vec<u64>,
}

/// Samples one map and computes ball profiles up to `r_max` around
/// `centers` vertices chosen by `policy`, plus around `v*`. `None` uses
/// `2 (max ℓ - min ℓ + 1)`, which bounds the diameter through `v*`.
pub fn volume_replica(
    params: &ModelParams,
    n: usize,
    replica: u64,
    seed: u64,
    centers: usize,
    policy: CenterPolicy,
    r_max: Option<u32>,
) -> Result<VolumeRecord> {
    let mut rng = replica_rng(seed);
    let s = sample_map(params, n, &mut rng)?;
    let r_max = r_max.unwrap_or_else(|| {
        let max = s.tree.labels().iter().copied().max().unwrap_or(0);
        2 * (max - s.tree.min_label() + 1) as u32
    });
    let graph = MapGraph::new(&s.map);
    let mut scratch = BfsScratch::default();
    let v = s.map.n_vertices();
    let chosen: Vec<usize> = (0..centers)
        .map(|_| match policy {
            CenterPolicy::Uniform => rng.random_range(0..v),
            CenterPolicy::Root => 0,
            CenterPolicy::Pointed => s.map.pointed_vertex(),
        })
        .collect();
    let mut profiles = Vec::with_capacity(centers);
    for &c in &chosen {
        profiles.push(graph.ball_profile_with(c, r_max, &mut scratch)?.cumulative);
    }
    let pointed_profile = graph.ball_profile_with(s.map.pointed_vertex(), r_max, &mut scratch)?.cumulative;
    Ok(VolumeRecord {
        replica,
        seed,
        n,
        root_to_pointed: s.root_to_pointed(),
        centers: chosen,
        profiles,
        pointed_profile,
    })
}

/// Default lower edge of the volume-fit window.
pub const VOLUME_WINDOW_LOW: u32 = 4;

/// Radii `[4, ⌊β · median_radius⌋]` used for the volume fit.
pub fn volume_window(median_radius: f64, beta: f64) -> Result<(u32, u32)> {
    let hi = libm::floor(beta * median_radius);
    if !(hi >= (VOLUME_WINDOW_LOW + 2) as f64) {
        return Err(Error::Config("volume-fit radius window holds fewer than 3 radii"));
    }
    Ok((VOLUME_WINDOW_LOW, hi as u32))
}

/// Fit of `log mean_counts[r]` against `log r` over `lo..=hi`.
pub fn fit_volume(mean_counts: &[f64], lo: u32, hi: u32) -> Result<SlopeFit> {
    if hi as usize >= mean_counts.len() || lo == 0 || hi < lo + 2 {
        return Err(Error::Config("volume-fit window outside the computed profile"));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi).map(|r| (r as f64, mean_counts[r as usize])).collect();
    fit_loglog_slope(&pts)
}

/// Fits on the nested windows `[lo, h]` for `h = lo + 2 ..= hi`.
pub fn window_sensitivity(mean_counts: &[f64], lo: u32, hi: u32) -> Vec<(u32, SlopeFit)> {
    (lo + 2..=hi).filter_map(|h| fit_volume(mean_counts, lo, h).ok().map(|f| (h, f))).collect()
}

/// Pointwise mean of equally long profiles.
pub fn mean_profile<'a>(profiles: impl IntoIterator<Item = &'a Vec<u64>>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for p in profiles {
        if acc.is_empty() {
            acc = vec![0.0; p.len()];
        }
        for (a, &x) in acc.iter_mut().zip(p) {
            *a += x as f64;
        }
        count += 1;
    }
    for a in &mut acc {
        *a /= count as f64;
    }
    acc
}

/// Fixed radius `max(1, round(n^{(α-1)/(2α)} / 8))` of the tail experiment.
pub fn voltail_radius(alpha: f64, n: usize) -> u32 {
    let r = libm::round(libm::pow(n as f64, targets::radius(alpha)) / 8.0);
    if r < 1.0 {
        1
    } else {
        r as u32
    }
}

/// Minimum number of tail points for a conclusive tail fit.
pub const MIN_TAIL_POINTS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub fit: Option<SlopeFit>,
    /// `(λ, P(X >= λ))` at every distinct sample value in the upper half.
    pub survival: Vec<(f64, f64)>,
    pub inconclusive: bool,
}

/// Log-log fit of the empirical survival function `λ ↦ P(X >= λ)` over the
/// distinct sample values at or above the median.
pub fn fit_survival_tail(values: &[f64]) -> TailFit {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| *x > 0.0).collect();
    v.sort_by(f64::total_cmp);
    let total = v.len();
    let mut survival = Vec::new();
    let mut i = 0;
    while i < total {
        let x = v[i];
        // P(X >= x) = (# values >= x) / total
        let above = total - i;
        if 2 * above <= total + 1 {
            survival.push((x, above as f64 / total as f64));
        }
        while i < total && v[i] == x {
            i += 1;
        }
    }
    let inconclusive = survival.len() < MIN_TAIL_POINTS;
    let fit = fit_loglog_slope(&survival).ok();
    TailFit { fit, survival, inconclusive }
}

/// Ball sizes at a fixed radius around uniform centers, normalized by
/// `r^{2α/(α-1)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolTailRecord {
    pub replica: u64,
    pub seed: u64,
    pub radius: u32,
    pub counts: Vec<u64>,
}

pub fn voltail_replica(
    params: &ModelParams,
    n: usize,
    replica: u64,
    seed: u64,
    centers: usize,
    radius: u32,
) -> Result<VolTailRecord> {
    let rec = volume_replica(params, n, replica, seed, centers, CenterPolicy::Uniform, Some(radius))?;
    let counts = rec.profiles.iter().map(|p| p[radius as usize]).collect();
    Ok(VolTailRecord { replica, seed, radius, counts })
}

/// One row of the rescaled coding processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRow {
    pub t: f64,
    /// `X_n((n + 1) t) / (c' n^{1/α})`.
    pub lukasiewicz: f64,
    /// `c' n^{-(1 - 1/α)} H_n(n t)`.
    pub height: f64,
    /// `(c' n^{-(1 - 1/α)} / σ_Y²)^{1/2} ℓ_n(n t)`.
    pub label: f64,
}

fn interpolate(values: &[f64], s: f64) -> f64 {
    let last = values.len() - 1;
    let s = s.clamp(0.0, last as f64);
    let k = libm::floor(s) as usize;
    if k >= last {
        return values[last];
    }
    let frac = s - k as f64;
    values[k] * (1.0 - frac) + values[k + 1] * frac
}

/// Rescaled Łukasiewicz path, height process and labels on a grid of
/// `t ∈ [0, 1]`, linearly interpolated. The Łukasiewicz path runs over the
/// `n + 2` times `0..=n+1`, so it ends at `-1` before rescaling.
pub fn rescaled_paths(lt: &LabelledTree, constants: &RescalingConstants, alpha: f64, grid: &[f64]) -> Vec<PathRow> {
    let n = lt.n_edges() as f64;
    let x: Vec<f64> = lt.tree().lukasiewicz().path().into_iter().map(|v| v as f64).collect();
    let h: Vec<f64> = lt.tree().heights().iter().map(|&v| v as f64).collect();
    let l: Vec<f64> = lt.labels().iter().map(|&v| v as f64).collect();
    let x_scale = 1.0 / (constants.c_prime * libm::pow(n, 1.0 / alpha));
    let h_scale = constants.c_prime * libm::pow(n, -(1.0 - 1.0 / alpha));
    let l_scale = libm::sqrt(h_scale / constants.sigma_y2);
    grid.iter()
        .map(|&t| PathRow {
            t,
            lukasiewicz: x_scale * interpolate(&x, (n + 1.0) * t),
            height: h_scale * interpolate(&h, n * t),
            label: l_scale * interpolate(&l, n * t),
        })
        .collect()
}

/// `points` equally spaced values from 0 to 1.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}
