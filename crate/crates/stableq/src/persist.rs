//! Text formats: SQT1 trees, SQM1 maps, CSV tables and JSON run manifests.
//!
//! Reals are written with 17 significant digits so that every file
//! round-trips bit-exactly and digests agree across platforms.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use stableq_core::cvs::validate_quadrangulation;
use stableq_core::gwtree::{LabelledTree, PlaneTree};
use stableq_core::{OffspringLaw, QuadMap, RescalingConstants};

use crate::error::{CliError, Result};

/// Renders a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// `serialize_with` helper applying [`fmt_real`].
pub fn real<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_real(*x))
}

/// Contents of an SQT1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFile {
    pub alpha: f64,
    pub seed: u64,
    pub tree: PlaneTree,
    pub labels: Option<Vec<i32>>,
}

impl TreeFile {
    pub fn labelled(alpha: f64, seed: u64, lt: &LabelledTree) -> Self {
        Self { alpha, seed, tree: lt.tree().clone(), labels: Some(lt.labels().to_vec()) }
    }

    pub fn into_labelled(self) -> Option<LabelledTree> {
        let labels = self.labels?;
        LabelledTree::new(self.tree, labels).ok()
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    let mut out = String::with_capacity(xs.len() * 3);
    for (k, x) in xs.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        out.push_str(&x.to_string());
    }
    out
}

pub fn format_tree(t: &TreeFile) -> String {
    let mut s = format!("SQT1 {} {} {}\n", t.tree.n_edges(), fmt_real(t.alpha), t.seed);
    s.push_str(&join(t.tree.offspring()));
    s.push('\n');
    if let Some(l) = &t.labels {
        s.push_str(&join(l));
        s.push('\n');
    }
    s
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self { path, iter: text.lines().enumerate(), last: 0 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let (k, l) = self.iter.next()?;
        self.last = k + 1;
        Some((k + 1, l))
    }

    fn require(&mut self, section: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| self.err(self.last + 1, format!("truncated file: missing {section}")))
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> CliError {
        CliError::Parse { path: self.path.to_path_buf(), line, msg: msg.into() }
    }

    fn finish(mut self) -> Result<()> {
        while let Some((k, l)) = self.next() {
            if !l.trim().is_empty() {
                return Err(self.err(k, "unexpected trailing content"));
            }
        }
        Ok(())
    }
}

fn parse_list<T: std::str::FromStr>(lines: &Lines, line: usize, text: &str, expect: usize, what: &str) -> Result<Vec<T>> {
    let vals = text
        .split_whitespace()
        .map(|tok| tok.parse::<T>().map_err(|_| lines.err(line, format!("bad {what} entry {tok:?}"))))
        .collect::<Result<Vec<T>>>()?;
    if vals.len() != expect {
        return Err(lines.err(line, format!("expected {expect} {what} entries, found {}", vals.len())));
    }
    Ok(vals)
}

fn field<T: std::str::FromStr>(lines: &Lines, line: usize, tok: Option<&str>, name: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err(line, format!("header lacks {name}")))?;
    tok.parse().map_err(|_| lines.err(line, format!("bad {name} {tok:?}")))
}

/// Parses SQT1 text; `path` only labels error messages.
pub fn parse_tree(path: &Path, text: &str) -> Result<TreeFile> {
    let mut lines = Lines::new(path, text);
    let (hl, header) = lines.require("header")?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("SQT1") {
        return Err(lines.err(hl, "not an SQT1 file"));
    }
    let n: usize = field(&lines, hl, tok.next(), "edge count")?;
    let alpha: f64 = field(&lines, hl, tok.next(), "alpha")?;
    let seed: u64 = field(&lines, hl, tok.next(), "seed")?;
    if tok.next().is_some() {
        return Err(lines.err(hl, "extra header fields"));
    }
    let (ol, otext) = lines.require("offspring section")?;
    let offspring: Vec<u32> = parse_list(&lines, ol, otext, n + 1, "offspring")?;
    let total: u64 = offspring.iter().map(|&c| c as u64).sum();
    if total != n as u64 {
        return Err(lines.err(ol, format!("offspring sum {total} differs from n = {n}")));
    }
    let tree = PlaneTree::from_offspring(&offspring).map_err(|e| lines.err(ol, e.to_string()))?;
    let labels = match lines.next() {
        Some((ll, ltext)) if !ltext.trim().is_empty() => {
            let labels: Vec<i32> = parse_list(&lines, ll, ltext, n + 1, "label")?;
            LabelledTree::new(tree.clone(), labels.clone()).map_err(|e| lines.err(ll, e.to_string()))?;
            Some(labels)
        }
        _ => None,
    };
    lines.finish()?;
    Ok(TreeFile { alpha, seed, tree, labels })
}

pub fn write_tree(path: &Path, t: &TreeFile) -> Result<()> {
    write_text(path, &format_tree(t))
}

pub fn read_tree(path: &Path) -> Result<TreeFile> {
    parse_tree(path, &read_text(path)?)
}

pub fn format_map(q: &QuadMap) -> String {
    let mut s = String::with_capacity(q.n_half_edges() * 24);
    let _ = writeln!(
        s,
        "SQM1 {} {} {} {} {}",
        q.n_vertices(),
        q.n_edges(),
        q.n_faces(),
        q.root_half_edge(),
        q.pointed_vertex()
    );
    for h in 0..q.n_half_edges() {
        let _ = writeln!(s, "{h} {} {} {}", q.twin(h), q.next(h), q.origin(h));
    }
    if let Some(l) = q.labels() {
        s.push_str(&join(l));
        s.push('\n');
    }
    s
}

/// Parses SQM1 text without validating the combinatorics.
pub fn parse_map_unchecked(path: &Path, text: &str) -> Result<QuadMap> {
    let mut lines = Lines::new(path, text);
    let (hl, header) = lines.require("header")?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("SQM1") {
        return Err(lines.err(hl, "not an SQM1 file"));
    }
    let v: usize = field(&lines, hl, tok.next(), "vertex count")?;
    let e: usize = field(&lines, hl, tok.next(), "edge count")?;
    let f: usize = field(&lines, hl, tok.next(), "face count")?;
    let root: u32 = field(&lines, hl, tok.next(), "root half-edge")?;
    let pointed: u32 = field(&lines, hl, tok.next(), "pointed vertex")?;
    if tok.next().is_some() {
        return Err(lines.err(hl, "extra header fields"));
    }
    let m = 2 * e;
    let (mut twin, mut next, mut origin) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    for h in 0..m {
        let (k, text) = lines.require(&format!("half-edge section (half-edge {h} of {m})"))?;
        let row: Vec<u32> = parse_list(&lines, k, text, 4, "half-edge")?;
        if row[0] as usize != h {
            return Err(lines.err(k, format!("half-edge {} out of order, expected {h}", row[0])));
        }
        twin.push(row[1]);
        next.push(row[2]);
        origin.push(row[3]);
    }
    let labels = match lines.next() {
        Some((ll, ltext)) if !ltext.trim().is_empty() => Some(parse_list(&lines, ll, ltext, v, "label")?),
        _ => None,
    };
    lines.finish()?;
    Ok(QuadMap::from_raw(f, v, twin, next, origin, root, pointed, labels))
}

/// Parses SQM1 text and rejects maps failing any validator check.
pub fn parse_map(path: &Path, text: &str) -> Result<QuadMap> {
    let q = parse_map_unchecked(path, text)?;
    let report = validate_quadrangulation(&q);
    if !report.all_passed() {
        let failed = report.failures().map(|c| c.name.to_string()).collect();
        return Err(CliError::InvalidMap { path: path.to_path_buf(), failed });
    }
    Ok(q)
}

pub fn write_map(path: &Path, q: &QuadMap) -> Result<()> {
    write_text(path, &format_map(q))
}

pub fn read_map(path: &Path) -> Result<QuadMap> {
    parse_map(path, &read_text(path)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `rows` as CSV with a header taken from the row type's fields.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// One row of a ball-profile table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileRow {
    pub map_id: u64,
    pub center_kind: &'static str,
    pub r: u32,
    pub count: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawEcho {
    pub alpha: f64,
    pub c_phi: f64,
    pub k_cut: usize,
    /// Tail constant `c` in `μ([x, ∞)) ~ c x^{-α}`.
    pub c: f64,
}

impl From<&OffspringLaw> for LawEcho {
    fn from(l: &OffspringLaw) -> Self {
        Self { alpha: l.alpha(), c_phi: l.c_phi(), k_cut: l.k_cut(), c: l.tail_constant() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsEcho {
    pub c_alpha: f64,
    pub c: f64,
    pub c_prime: f64,
    pub sigma_y2: f64,
}

impl From<&RescalingConstants> for ConstantsEcho {
    fn from(k: &RescalingConstants) -> Self {
        Self { c_alpha: k.c_alpha, c: k.c, c_prime: k.c_prime, sigma_y2: k.sigma_y2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedEntry {
    pub n: usize,
    pub replica: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run. Timestamps live here and nowhere
/// else, so data-file digests do not depend on when the run happened.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: String,
    pub config: serde_json::Value,
    pub law: LawEcho,
    pub constants: Option<ConstantsEcho>,
    pub master_seed: u64,
    pub seeds: Vec<SeedEntry>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputDigest>,
    pub failures: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(kind: &str, config: serde_json::Value, law: &OffspringLaw, master_seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            kind: kind.to_string(),
            config,
            law: law.into(),
            constants: None,
            master_seed,
            seeds: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    /// Records the digest of an output file under its file name.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.push(OutputDigest { file, sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_text(path, &text)
    }
}

/// Resolves the output directory: explicit flag, then `STABLEQ_OUT_DIR`,
/// then `./stableq-out`.
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("STABLEQ_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("stableq-out"))
}

pub fn create_writer(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn finish_writer(path: &Path, mut w: BufWriter<fs::File>) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}
