//! Parallel replica runner and the five experiments.
//!
//! Every replica gets `derive_seed(master_seed, index)` where `index` counts
//! jobs size by size, so results do not depend on scheduling. Outputs are
//! collected in job order before anything is aggregated or written.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use stableq_core::scaling::{
    self, fit_survival_tail, fit_volume, maxdegree_replica, mean_profile, median, radius_replica, targets,
    trimmed_mean, volume_replica, volume_window, voltail_radius, CenterPolicy, ModelParams, SlopeFit,
};
use stableq_core::seed::derive_seed;
use stableq_core::{fit_loglog_slope, Epsilon, Error as CoreError, OffspringLaw, RescalingConstants};

use crate::error::{CliError, Result};
use crate::persist::{real, write_csv, ProfileRow, RunManifest, SeedEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Radius,
    Volume,
    Maxdeg,
    Voltail,
    Paths,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Radius => "radius",
            ExperimentKind::Volume => "volume",
            ExperimentKind::Maxdeg => "maxdeg",
            ExperimentKind::Voltail => "voltail",
            ExperimentKind::Paths => "paths",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Centers {
    #[default]
    Uniform,
    Root,
    Pointed,
}

impl From<Centers> for CenterPolicy {
    fn from(c: Centers) -> Self {
        match c {
            Centers::Uniform => CenterPolicy::Uniform,
            Centers::Root => CenterPolicy::Root,
            Centers::Pointed => CenterPolicy::Pointed,
        }
    }
}

impl Centers {
    fn name(self) -> &'static str {
        match self {
            Centers::Uniform => "uniform",
            Centers::Root => "root",
            Centers::Pointed => "pointed",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub p0: f64,
    /// `None` uses `1/α`.
    pub c_phi: Option<f64>,
    pub k_cut: usize,
    pub sizes: Vec<usize>,
    pub replicas: u64,
    pub master_seed: u64,
    /// Ball centers per map (volume and voltail).
    pub centers: usize,
    pub policy: Centers,
    /// Upper edge of the volume window as a fraction of the median radius.
    pub beta: f64,
    /// Profile depth; `None` covers the whole map (volume) or uses the
    /// default tail radius (voltail).
    pub r_max: Option<u32>,
    /// Replicas per size whose radius is re-measured by BFS.
    pub audit: u64,
    pub grid_points: usize,
    /// `None` draws ε with a seeded coin per replica.
    pub epsilon: Option<i8>,
    pub max_trials: u64,
    /// Thread count only affects speed and is left out of the manifest.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            p0: 1.0 / 3.0,
            c_phi: None,
            k_cut: stableq_core::offspring::DEFAULT_K_CUT,
            sizes: vec![1 << 10, 1 << 12, 1 << 14, 1 << 16],
            replicas: 200,
            master_seed: 1,
            centers: 25,
            policy: Centers::Uniform,
            beta: 0.5,
            r_max: None,
            audit: 25,
            grid_points: 201,
            epsilon: None,
            max_trials: scaling::DEFAULT_MAX_TRIALS,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 2) {
            return Err(CliError::Usage("sizes must be nonempty and at least 2".into()));
        }
        if self.replicas < 1 {
            return Err(CliError::Usage("replicas must be at least 1".into()));
        }
        if !(self.beta > 0.0) {
            return Err(CliError::Usage("beta must be positive".into()));
        }
        if self.grid_points < 2 {
            return Err(CliError::Usage("grid needs at least 2 points".into()));
        }
        if matches!(self.epsilon, Some(e) if e != 1 && e != -1) {
            return Err(CliError::Usage("epsilon must be +1 or -1".into()));
        }
        Ok(())
    }

    pub fn law(&self) -> Result<OffspringLaw> {
        Ok(OffspringLaw::new(self.alpha, self.c_phi, self.k_cut)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::new(self.law()?, self.p0);
        p.epsilon = self.epsilon.and_then(Epsilon::from_sign);
        p.max_trials = self.max_trials;
        Ok(p)
    }

    /// `(n, replica, seed)` for every job, size by size.
    pub fn jobs(&self) -> Vec<SeedEntry> {
        let mut out = Vec::with_capacity(self.sizes.len() * self.replicas as usize);
        for (s, &n) in self.sizes.iter().enumerate() {
            for r in 0..self.replicas {
                let idx = s as u64 * self.replicas + r;
                out.push(SeedEntry { n, replica: r, seed: derive_seed(self.master_seed, idx) });
            }
        }
        out
    }
}

/// Runs `f` on every job in a pool of `threads` workers (0 = all cores) and
/// returns the outcomes in job order.
pub fn run_jobs<T, F>(threads: usize, jobs: &[SeedEntry], f: F) -> Result<Vec<std::result::Result<T, CoreError>>>
where
    T: Send,
    F: Fn(&SeedEntry) -> std::result::Result<T, CoreError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(&f).collect()))
}

/// What an experiment printed and wrote.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub fit: Option<SlopeFit>,
    pub target: Option<f64>,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    /// Replicas that failed, as `(n, replica, message)`.
    pub failures: Vec<(usize, u64, String)>,
    /// Set when a failure was a sampling-budget exhaustion.
    pub budget_exhausted: bool,
    /// Set when a per-replica invariant did not hold.
    pub invariant_violation: Option<String>,
}

impl ExperimentReport {
    fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            fit: None,
            target: None,
            lines: Vec::new(),
            files: Vec::new(),
            failures: Vec::new(),
            budget_exhausted: false,
            invariant_violation: None,
        }
    }

    fn fit_line(&mut self, label: &str, fit: &std::result::Result<SlopeFit, CoreError>, target: f64) {
        match fit {
            Ok(f) => self.lines.push(format!(
                "{label}: slope {:.4} ± {:.4} over {} points (target {:.4})",
                f.slope, f.stderr, f.points, target
            )),
            Err(e) => self.lines.push(format!("{label}: no fit ({e}) (target {target:.4})")),
        }
    }
}

fn split_outcomes<T>(
    jobs: &[SeedEntry],
    outcomes: Vec<std::result::Result<T, CoreError>>,
    report: &mut ExperimentReport,
) -> Vec<T> {
    let mut ok = Vec::with_capacity(outcomes.len());
    for (job, o) in jobs.iter().zip(outcomes) {
        match o {
            Ok(t) => ok.push(t),
            Err(e) => {
                if matches!(e, CoreError::SamplingBudget { .. }) {
                    report.budget_exhausted = true;
                }
                report.failures.push((job.n, job.replica, e.to_string()));
            }
        }
    }
    ok
}

#[derive(Debug, Serialize)]
struct RadiusRow {
    n: usize,
    replica: u64,
    seed: u64,
    distance: u32,
    bfs_distance: Option<u32>,
    map_root_distance: u32,
}

#[derive(Debug, Serialize)]
struct SizeSummary {
    n: usize,
    replicas: usize,
    #[serde(serialize_with = "real")]
    median: f64,
    #[serde(serialize_with = "real")]
    mean: f64,
    #[serde(serialize_with = "real")]
    trimmed_mean: f64,
}

fn summarize(n: usize, values: &[f64]) -> SizeSummary {
    SizeSummary { n, replicas: values.len(), median: median(values), mean: scaling::mean(values), trimmed_mean: trimmed_mean(values, 0.1) }
}

fn per_size<T>(sizes: &[usize], records: &[T], n_of: impl Fn(&T) -> usize, value: impl Fn(&T) -> f64) -> Vec<(usize, Vec<f64>)> {
    sizes.iter().map(|&n| (n, records.iter().filter(|r| n_of(r) == n).map(&value).collect())).collect()
}

fn median_fit(groups: &[(usize, Vec<f64>)]) -> std::result::Result<SlopeFit, CoreError> {
    let pts: Vec<(f64, f64)> =
        groups.iter().filter(|(_, v)| !v.is_empty()).map(|(n, v)| (*n as f64, median(v))).collect();
    fit_loglog_slope(&pts)
}

#[derive(Debug, Serialize)]
struct MaxDegRow {
    n: usize,
    replica: u64,
    seed: u64,
    tree_max_offspring: u32,
    map_max_degree: u32,
}

#[derive(Debug, Serialize)]
struct FitRow {
    n: usize,
    window_lo: u32,
    window_hi: u32,
    headline: bool,
    #[serde(serialize_with = "real")]
    slope: f64,
    #[serde(serialize_with = "real")]
    stderr: f64,
    points: usize,
    #[serde(serialize_with = "real")]
    r_squared: f64,
}

#[derive(Debug, Serialize)]
struct MeanProfileRow {
    n: usize,
    center_kind: &'static str,
    r: u32,
    #[serde(serialize_with = "real")]
    mean_count: f64,
    #[serde(serialize_with = "real")]
    median_count: f64,
}

#[derive(Debug, Serialize)]
struct VolTailRow {
    n: usize,
    replica: u64,
    center: usize,
    radius: u32,
    count: u64,
    #[serde(serialize_with = "real")]
    normalized: f64,
}

#[derive(Debug, Serialize)]
struct SurvivalRow {
    n: usize,
    #[serde(serialize_with = "real")]
    lambda: f64,
    #[serde(serialize_with = "real")]
    survival: f64,
}

#[derive(Debug, Serialize)]
struct PathOut {
    n: usize,
    replica: u64,
    #[serde(serialize_with = "real")]
    t: f64,
    #[serde(serialize_with = "real")]
    lukasiewicz: f64,
    #[serde(serialize_with = "real")]
    height: f64,
    #[serde(serialize_with = "real")]
    label: f64,
}

fn pad(profile: &[u64], len: usize) -> Vec<u64> {
    let mut p = profile.to_vec();
    let last = *p.last().unwrap_or(&0);
    p.resize(len, last);
    p
}

/// Runs one experiment, writing CSV files and `manifest.json` into `out_dir`.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let params = cfg.params()?;
    let constants = RescalingConstants::new(&params.law, cfg.p0)?;
    let mut manifest = RunManifest::new(kind.name(), serde_json::to_value(cfg)?, &params.law, cfg.master_seed);
    manifest.constants = Some((&constants).into());
    let jobs = cfg.jobs();
    manifest.seeds = jobs.clone();
    let mut report = ExperimentReport::new(kind);
    let alpha = cfg.alpha;
    let file = |name: &str| out_dir.join(name);

    match kind {
        ExperimentKind::Radius => {
            let out = run_jobs(cfg.threads, &jobs, |j| radius_replica(&params, j.n, j.replica, j.seed, j.replica < cfg.audit))?;
            let recs = split_outcomes(&jobs, out, &mut report);
            for r in &recs {
                if let Some(b) = r.bfs_distance {
                    if b != r.distance {
                        report.invariant_violation =
                            Some(format!("n={} replica {}: label radius {} but BFS {}", r.n, r.replica, r.distance, b));
                    }
                }
            }
            let rows: Vec<RadiusRow> = recs
                .iter()
                .map(|r| RadiusRow {
                    n: r.n,
                    replica: r.replica,
                    seed: r.seed,
                    distance: r.distance,
                    bfs_distance: r.bfs_distance,
                    map_root_distance: r.map_root_distance,
                })
                .collect();
            write_csv(&file("radius.csv"), &rows)?;
            let groups = per_size(&cfg.sizes, &recs, |r| r.n, |r| r.distance as f64);
            let summary: Vec<SizeSummary> = groups.iter().map(|(n, v)| summarize(*n, v)).collect();
            write_csv(&file("radius_summary.csv"), &summary)?;
            report.files.extend([file("radius.csv"), file("radius_summary.csv")]);
            for s in &summary {
                report.lines.push(format!("n={} median d(root, v*) = {} mean = {:.3}", s.n, s.median, s.mean));
            }
            let fit = median_fit(&groups);
            let target = targets::radius(alpha);
            report.fit_line("radius exponent", &fit, target);
            report.fit = fit.ok();
            report.target = Some(target);
        }
        ExperimentKind::Maxdeg => {
            let out = run_jobs(cfg.threads, &jobs, |j| maxdegree_replica(&params, j.n, j.replica, j.seed))?;
            let recs = split_outcomes(&jobs, out, &mut report);
            if let Some(r) = recs.iter().find(|r| r.map_max_degree < r.tree_max_offspring) {
                report.invariant_violation = Some(format!(
                    "n={} replica {}: map max degree {} below tree max offspring {}",
                    r.n, r.replica, r.map_max_degree, r.tree_max_offspring
                ));
            }
            let rows: Vec<MaxDegRow> = recs
                .iter()
                .map(|r| MaxDegRow {
                    n: r.n,
                    replica: r.replica,
                    seed: r.seed,
                    tree_max_offspring: r.tree_max_offspring,
                    map_max_degree: r.map_max_degree,
                })
                .collect();
            write_csv(&file("maxdeg.csv"), &rows)?;
            let tree = per_size(&cfg.sizes, &recs, |r| r.n, |r| r.tree_max_offspring as f64);
            let map = per_size(&cfg.sizes, &recs, |r| r.n, |r| r.map_max_degree as f64);
            let summary: Vec<SizeSummary> = tree.iter().map(|(n, v)| summarize(*n, v)).collect();
            write_csv(&file("maxdeg_summary.csv"), &summary)?;
            report.files.extend([file("maxdeg.csv"), file("maxdeg_summary.csv")]);
            let target = targets::max_offspring(alpha);
            let fit = median_fit(&tree);
            report.fit_line("tree max offspring exponent", &fit, target);
            report.fit_line("map max degree exponent", &median_fit(&map), target);
            report.fit = fit.ok();
            report.target = Some(target);
        }
        ExperimentKind::Volume => {
            let policy: CenterPolicy = cfg.policy.into();
            let out = run_jobs(cfg.threads, &jobs, |j| {
                volume_replica(&params, j.n, j.replica, j.seed, cfg.centers, policy, cfg.r_max)
            })?;
            let recs = split_outcomes(&jobs, out, &mut report);
            let mut rows = Vec::new();
            let mut fit_rows = Vec::new();
            let mut mean_rows = Vec::new();
            let target = targets::volume(alpha);
            for (s, &n) in cfg.sizes.iter().enumerate() {
                let group: Vec<_> = recs.iter().filter(|r| r.n == n).collect();
                if group.is_empty() {
                    continue;
                }
                for r in &group {
                    let map_id = s as u64 * cfg.replicas + r.replica;
                    for p in &r.profiles {
                        for (rad, &c) in p.iter().enumerate() {
                            rows.push(ProfileRow { map_id, center_kind: cfg.policy.name(), r: rad as u32, count: c });
                        }
                    }
                    for (rad, &c) in r.pointed_profile.iter().enumerate() {
                        rows.push(ProfileRow { map_id, center_kind: "pointed", r: rad as u32, count: c });
                    }
                }
                let len = group.iter().flat_map(|r| r.profiles.iter().chain([&r.pointed_profile])).map(Vec::len).max().unwrap_or(1);
                let centered: Vec<Vec<u64>> = group.iter().flat_map(|r| r.profiles.iter().map(|p| pad(p, len))).collect();
                let pointed: Vec<Vec<u64>> = group.iter().map(|r| pad(&r.pointed_profile, len)).collect();
                let mean_c = mean_profile(&centered);
                let mean_p = mean_profile(&pointed);
                for rad in 0..len {
                    let col = |ps: &[Vec<u64>]| ps.iter().map(|p| p[rad] as f64).collect::<Vec<_>>();
                    mean_rows.push(MeanProfileRow {
                        n,
                        center_kind: cfg.policy.name(),
                        r: rad as u32,
                        mean_count: mean_c[rad],
                        median_count: median(&col(&centered)),
                    });
                    mean_rows.push(MeanProfileRow {
                        n,
                        center_kind: "pointed",
                        r: rad as u32,
                        mean_count: mean_p[rad],
                        median_count: median(&col(&pointed)),
                    });
                }
                let radii: Vec<f64> = group.iter().map(|r| r.root_to_pointed as f64).collect();
                let med = median(&radii);
                report.lines.push(format!(
                    "n={n}: {} maps, {} centers, median d(root, v*) = {med}",
                    group.len(),
                    centered.len()
                ));
                let (lo, hi) = match volume_window(med, cfg.beta) {
                    Ok(w) => w,
                    Err(e) => {
                        report.lines.push(format!("n={n}: {e}"));
                        continue;
                    }
                };
                let hi = hi.min(len as u32 - 1);
                let fit = fit_volume(&mean_c, lo, hi);
                report.fit_line(&format!("n={n} volume exponent on r in [{lo}, {hi}]"), &fit, target);
                for (h, f) in scaling::window_sensitivity(&mean_c, lo, hi) {
                    fit_rows.push(FitRow {
                        n,
                        window_lo: lo,
                        window_hi: h,
                        headline: h == hi,
                        slope: f.slope,
                        stderr: f.stderr,
                        points: f.points,
                        r_squared: f.r_squared,
                    });
                }
                let probe_r = hi as usize;
                report.lines.push(format!(
                    "n={n}: mean ball at r={probe_r}: {} centers {:.1}, v* {:.1}",
                    cfg.policy.name(),
                    mean_c[probe_r],
                    mean_p[probe_r]
                ));
                if let Ok(f) = fit {
                    report.fit = Some(f);
                }
            }
            write_csv(&file("volume_profiles.csv"), &rows)?;
            write_csv(&file("volume_mean_profiles.csv"), &mean_rows)?;
            write_csv(&file("volume_fit.csv"), &fit_rows)?;
            report.files.extend([file("volume_profiles.csv"), file("volume_mean_profiles.csv"), file("volume_fit.csv")]);
            report.target = Some(target);
        }
        ExperimentKind::Voltail => {
            let out = run_jobs(cfg.threads, &jobs, |j| {
                let r = cfg.r_max.unwrap_or_else(|| voltail_radius(alpha, j.n));
                scaling::voltail_replica(&params, j.n, j.replica, j.seed, cfg.centers, r)
            })?;
            let recs = split_outcomes(&jobs, out, &mut report);
            let norm_exp = targets::volume(alpha);
            let mut rows = Vec::new();
            let mut surv_rows = Vec::new();
            let reference = targets::voltail_reference(alpha);
            for &n in &cfg.sizes {
                let group: Vec<_> = recs.iter().filter(|r| jobs.iter().any(|j| j.n == n && j.seed == r.seed)).collect();
                let mut values = Vec::new();
                for r in &group {
                    let scale = (r.radius as f64).powf(norm_exp);
                    for (c, &count) in r.counts.iter().enumerate() {
                        let x = count as f64 / scale;
                        values.push(x);
                        rows.push(VolTailRow { n, replica: r.replica, center: c, radius: r.radius, count, normalized: x });
                    }
                }
                if values.is_empty() {
                    continue;
                }
                let tail = fit_survival_tail(&values);
                for &(lambda, survival) in &tail.survival {
                    surv_rows.push(SurvivalRow { n, lambda, survival });
                }
                let radius = group.first().map(|r| r.radius).unwrap_or(0);
                let fit = tail.fit.ok_or(CoreError::Config("fewer than 3 tail points"));
                report.fit_line(&format!("n={n} r={radius} ball-volume tail exponent"), &fit, reference);
                report.lines.push(format!(
                    "n={n}: {} tail points{}; bracket [{:.4}, {:.4}]",
                    tail.survival.len(),
                    if tail.inconclusive { " (inconclusive)" } else { "" },
                    reference,
                    targets::voltail_upper(alpha)
                ));
                if let Some(f) = tail.fit {
                    report.fit = Some(f);
                }
            }
            write_csv(&file("voltail.csv"), &rows)?;
            write_csv(&file("voltail_survival.csv"), &surv_rows)?;
            report.files.extend([file("voltail.csv"), file("voltail_survival.csv")]);
            report.target = Some(reference);
        }
        ExperimentKind::Paths => {
            let grid = scaling::uniform_grid(cfg.grid_points);
            let out = run_jobs(cfg.threads, &jobs, |j| {
                let mut rng = scaling::replica_rng(j.seed);
                let s = scaling::sample_map(&params, j.n, &mut rng)?;
                Ok((j.n, j.replica, scaling::rescaled_paths(&s.tree, &constants, alpha, &grid)))
            })?;
            let recs = split_outcomes(&jobs, out, &mut report);
            let rows: Vec<PathOut> = recs
                .iter()
                .flat_map(|(n, rep, rows)| {
                    rows.iter().map(move |p| PathOut {
                        n: *n,
                        replica: *rep,
                        t: p.t,
                        lukasiewicz: p.lukasiewicz,
                        height: p.height,
                        label: p.label,
                    })
                })
                .collect();
            write_csv(&file("paths.csv"), &rows)?;
            report.files.push(file("paths.csv"));
            report.lines.push(format!(
                "C_alpha = {:.6}, c = {:.6}, c' = {:.6}, sigma_Y^2 = {:.6}",
                constants.c_alpha, constants.c, constants.c_prime, constants.sigma_y2
            ));
        }
    }
    for (n, rep, msg) in &report.failures {
        report.lines.push(format!("n={n} replica {rep} failed: {msg}"));
    }
    for f in &report.files {
        manifest.add_output(f)?;
    }
    manifest.failures = report.failures.iter().map(|(n, r, m)| format!("n={n} replica {r}: {m}")).collect();
    manifest.write(&file("manifest.json"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_follow_the_global_job_index() {
        let cfg = ExperimentConfig { sizes: vec![10, 20], replicas: 3, master_seed: 9, ..Default::default() };
        let jobs = cfg.jobs();
        assert_eq!(jobs.len(), 6);
        for (k, j) in jobs.iter().enumerate() {
            assert_eq!(j.seed, derive_seed(9, k as u64));
            assert_eq!(j.n, if k < 3 { 10 } else { 20 });
            assert_eq!(j.replica, k as u64 % 3);
        }
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ExperimentConfig { sizes: vec![], ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { sizes: vec![1], ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { replicas: 0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { epsilon: Some(0), ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { grid_points: 1, ..ok }.validate().is_err());
    }

    #[test]
    fn job_order_survives_parallelism() {
        let cfg = ExperimentConfig { sizes: vec![50, 60, 70], replicas: 20, ..Default::default() };
        let jobs = cfg.jobs();
        let one = run_jobs(1, &jobs, |j| Ok(j.seed ^ j.n as u64)).unwrap();
        let many = run_jobs(4, &jobs, |j| Ok(j.seed ^ j.n as u64)).unwrap();
        let unwrap = |v: Vec<std::result::Result<u64, CoreError>>| v.into_iter().map(|r| r.unwrap()).collect::<Vec<_>>();
        assert_eq!(unwrap(one), unwrap(many));
    }
}
