use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand};
use stableq::core::cvs::{canonical_code, enumerate_small, validate_quadrangulation};
use stableq::core::scaling::{replica_rng, sample_map, ModelParams, DEFAULT_MAX_TRIALS};
use stableq::core::seed::derive_seed;
use stableq::core::{Epsilon, OffspringLaw};
use stableq::error::{CliError, ExitCode, Result};
use stableq::harness::{run_experiment, Centers, ExperimentConfig, ExperimentKind};
use stableq::mesh::{export_mesh, write_obj, Layout, LayoutOptions};
use stableq::persist::{self, RunManifest, SeedEntry, TreeFile};

// Writes to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Random quadrangulations built from heavy-tailed conditioned trees.
///
/// Exit codes: 0 ok, 1 invariant violation, 2 usage error, 3 I/O error,
/// 4 sampling budget exhausted.
#[derive(Debug, Parser)]
#[command(name = "stableq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one labelled tree and its quadrangulation.
    Sample(SampleArgs),
    /// Run a scaling experiment and write CSV tables plus a manifest.
    Experiment(ExperimentArgs),
    /// Run the full validator on an SQM1 map file.
    Validate {
        path: PathBuf,
    },
    /// Lay out an SQM1 map and write an OBJ mesh.
    Mesh(MeshArgs),
    /// Enumerate every (labelled tree, epsilon) pair with n edges.
    Enumerate {
        #[arg(long, short = 'n')]
        edges: usize,
        /// Also write each map as an SQM1 file into this directory.
        #[arg(long)]
        write_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct LawArgs {
    /// Stable index in (1, 2).
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Label increment P(Y = 0).
    #[arg(long, default_value_t = 1.0 / 3.0)]
    p0: f64,
    /// Coefficient in phi(s) = s + c_phi (1 - s)^alpha; defaults to 1/alpha.
    #[arg(long)]
    c_phi: Option<f64>,
    /// Size of the exact offspring table.
    #[arg(long, default_value_t = stableq::core::offspring::DEFAULT_K_CUT)]
    k_cut: usize,
    /// Rejection budget of the conditioned sampler.
    #[arg(long, default_value_t = DEFAULT_MAX_TRIALS)]
    max_trials: u64,
}

fn parse_epsilon(s: &str) -> std::result::Result<i8, String> {
    match s {
        "1" | "+1" | "plus" => Ok(1),
        "-1" | "minus" => Ok(-1),
        _ => Err(format!("expected +1 or -1, got {s:?}")),
    }
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    law: LawArgs,
    /// Number of tree edges, i.e. faces of the map.
    #[arg(long, short = 'n')]
    edges: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Root orientation, +1 or -1; a seeded coin when absent.
    #[arg(long, value_parser = parse_epsilon, allow_hyphen_values = true)]
    epsilon: Option<i8>,
    /// Defaults to <out-dir>/tree.sqt.
    #[arg(long)]
    out_tree: Option<PathBuf>,
    /// Defaults to <out-dir>/map.sqm.
    #[arg(long)]
    out_map: Option<PathBuf>,
    #[arg(long, env = "STABLEQ_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[command(flatten)]
    law: LawArgs,
    /// Comma-separated tree sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [1024usize, 4096, 16384, 65536])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    replicas: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Ball centers per map.
    #[arg(long, default_value_t = 25)]
    centers: usize,
    #[arg(long, value_enum, default_value_t = Centers::Uniform)]
    policy: Centers,
    /// Volume window upper edge as a fraction of the median radius.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Ball radius cap (volume) or fixed radius (voltail).
    #[arg(long)]
    r_max: Option<u32>,
    /// Replicas per size whose radius is cross-checked by BFS.
    #[arg(long, default_value_t = 25)]
    audit: u64,
    /// Grid points on [0, 1] for path output.
    #[arg(long, default_value_t = 201)]
    grid: usize,
    #[arg(long, value_parser = parse_epsilon, allow_hyphen_values = true)]
    epsilon: Option<i8>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, env = "STABLEQ_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MeshArgs {
    map: PathBuf,
    #[arg(long, value_enum, default_value_t = Layout::Tutte)]
    layout: Layout,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration budget; defaults to 5000 for tutte and 300 for spring.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn law(a: &LawArgs) -> Result<OffspringLaw> {
    Ok(OffspringLaw::new(a.alpha, a.c_phi, a.k_cut)?)
}

fn cmd_sample(a: SampleArgs) -> Result<ExitCode> {
    let law = law(&a.law)?;
    let dir = persist::output_dir(a.out_dir.as_deref());
    let tree_path = a.out_tree.unwrap_or_else(|| dir.join("tree.sqt"));
    let map_path = a.out_map.unwrap_or_else(|| dir.join("map.sqm"));
    let config = serde_json::json!({
        "alpha": a.law.alpha,
        "p0": a.law.p0,
        "c_phi": a.law.c_phi,
        "k_cut": a.law.k_cut,
        "max_trials": a.law.max_trials,
        "edges": a.edges,
        "epsilon": a.epsilon,
    });
    let mut manifest = RunManifest::new("sample", config, &law, a.seed);
    let seed = derive_seed(a.seed, 0);
    manifest.seeds.push(SeedEntry { n: a.edges, replica: 0, seed });
    let mut params = ModelParams::new(law, a.law.p0);
    params.max_trials = a.law.max_trials;
    params.epsilon = a.epsilon.and_then(Epsilon::from_sign);
    let mut rng = replica_rng(seed);
    let s = sample_map(&params, a.edges, &mut rng)?;
    let report = validate_quadrangulation(&s.map);
    persist::write_tree(&tree_path, &TreeFile::labelled(a.law.alpha, a.seed, &s.tree))?;
    persist::write_map(&map_path, &s.map)?;
    manifest.add_output(&tree_path)?;
    manifest.add_output(&map_path)?;
    manifest.config["epsilon_drawn"] = serde_json::json!(s.epsilon.sign());
    manifest.write(&manifest_path(&map_path))?;
    say!(
        "V={} E={} F={} d(root,pointed)={} max_degree={} epsilon={:+} trials={}",
        s.map.n_vertices(),
        s.map.n_edges(),
        s.map.n_faces(),
        s.root_to_pointed(),
        s.map.max_degree(),
        s.epsilon.sign(),
        s.trials
    );
    if !report.all_passed() {
        for c in report.failures() {
            eprintln!("FAIL {}: {}", c.name, c.detail);
        }
        return Ok(ExitCode::Invariant);
    }
    Ok(ExitCode::Ok)
}

fn manifest_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().map(|f| f.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    data.with_file_name(name)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let cfg = ExperimentConfig {
        alpha: a.law.alpha,
        p0: a.law.p0,
        c_phi: a.law.c_phi,
        k_cut: a.law.k_cut,
        sizes: a.sizes,
        replicas: a.replicas,
        master_seed: a.seed,
        centers: a.centers,
        policy: a.policy,
        beta: a.beta,
        r_max: a.r_max,
        audit: a.audit,
        grid_points: a.grid,
        epsilon: a.epsilon,
        max_trials: a.law.max_trials,
        threads: a.threads,
    };
    let dir = persist::output_dir(a.out_dir.as_deref());
    eprintln!("running {} experiment into {}", a.kind.name(), dir.display());
    let report = run_experiment(a.kind, &cfg, &dir)?;
    for l in &report.lines {
        say!("{l}");
    }
    if let Some(v) = &report.invariant_violation {
        eprintln!("invariant violated: {v}");
        return Ok(ExitCode::Invariant);
    }
    if report.budget_exhausted {
        eprintln!("{} replicas exhausted the sampling budget; results are partial", report.failures.len());
        return Ok(ExitCode::Budget);
    }
    Ok(ExitCode::Ok)
}

fn cmd_validate(path: &Path) -> Result<ExitCode> {
    let q = persist::parse_map_unchecked(path, &persist::read_text(path)?)?;
    let report = validate_quadrangulation(&q);
    for c in &report.checks {
        say!("{:<22} {} {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    Ok(if report.all_passed() { ExitCode::Ok } else { ExitCode::Invariant })
}

fn cmd_mesh(a: MeshArgs) -> Result<ExitCode> {
    let q = persist::read_map(&a.map)?;
    let default_iters = match a.layout {
        Layout::Tutte => 5000,
        Layout::Spring => 300,
    };
    let opts = LayoutOptions { max_iterations: a.iterations.unwrap_or(default_iters), seed: a.seed, ..Default::default() };
    let mesh = export_mesh(&q, a.layout, &opts);
    let mut w = persist::create_writer(&a.out)?;
    write_obj(&mut w, &mesh).map_err(|e| CliError::io(&a.out, e))?;
    persist::finish_writer(&a.out, w)?;
    if !mesh.converged {
        eprintln!("warning: layout did not converge within {} iterations", mesh.iterations);
    }
    say!("{} vertices, {} faces, {} iterations", mesh.positions.len(), mesh.faces.len(), mesh.iterations);
    Ok(ExitCode::Ok)
}

fn cmd_enumerate(n: usize, write_dir: Option<PathBuf>) -> Result<ExitCode> {
    let all = enumerate_small(n)?;
    let mut codes: Vec<Vec<u32>> = all.iter().map(|e| canonical_code(&e.map)).collect();
    let valid = all.iter().filter(|e| validate_quadrangulation(&e.map).all_passed()).count();
    codes.sort();
    codes.dedup();
    if let Some(dir) = write_dir {
        for (k, e) in all.iter().enumerate() {
            persist::write_map(&dir.join(format!("n{n}_{k:05}.sqm")), &e.map)?;
        }
    }
    say!("n={n} images={} valid={valid} distinct={}", all.len(), codes.len());
    Ok(if valid == all.len() && codes.len() == all.len() { ExitCode::Ok } else { ExitCode::Invariant })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Validate { path } => cmd_validate(&path),
        Command::Mesh(a) => cmd_mesh(a),
        Command::Enumerate { edges, write_dir } => cmd_enumerate(edges, write_dir),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Usage } else { ExitCode::Ok };
            let _ = e.print();
            process::exit(code as i32);
        }
    };
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    process::exit(code as i32);
}
