//! End-to-end synthetic benchmark: generate GP data on a fixed random layout,
//! learn a CGL and a DDGL from training draws, select sampling sets with each
//! method, reconstruct noisy test signals and record the average MSE.
//!
//! A run is a pure function of its [`ExperimentConfig`]. Seeds are processed
//! in parallel on the ambient rayon pool and rows are merged in a fixed order,
//! so `results.csv` is byte-identical across runs and thread counts. Selection
//! wall times go to `timings.csv` and never into `results.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{GraphModel, SamplingSet};
use crate::io::atomic_write;
use crate::learn::{learn_cgl, learn_ddgl, LearnConfig, LearnTrace};
use crate::matrix::DenseSymMatrix;
use crate::reconstruct::{GlrSolver, DEFAULT_MU};
use crate::sampler::{
    gamma_from_mu, greedy_doptimal, random_select_fixed, vis_select, visr_select,
};
use crate::synth::{
    add_noise, derive_seed, empirical_covariance, generate_layout, gp_covariance,
    sample_gaussian_signals, SignalBatch, DEFAULT_RANGE, DEFAULT_VARIANCE,
};

/// Sampling method plus the operator used for reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Greedy D-optimal on `L + Q`, reconstructed with `L + Q`.
    Greedy,
    /// Greedy D-optimal on the CGL `L`, reconstructed with `L`.
    GreedyCgl,
    Vis,
    Visr,
    /// Uniform fixed-size random set, reconstructed with `L`.
    RandomL,
    /// The same random set, reconstructed with `L + Q`.
    RandomLq,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Greedy,
        Method::GreedyCgl,
        Method::Vis,
        Method::Visr,
        Method::RandomL,
        Method::RandomLq,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::GreedyCgl => "greedy-cgl",
            Method::Vis => "vis",
            Method::Visr => "visr",
            Method::RandomL => "random-l",
            Method::RandomLq => "random-lq",
        }
    }

    /// Whether reconstruction uses `L + Q` (otherwise `L`).
    pub fn uses_importance(self) -> bool {
        !matches!(self, Method::GreedyCgl | Method::RandomL)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub r: f64,
    pub variance: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub budgets: Vec<usize>,
    pub sigma_levels: Vec<f64>,
    pub mu: f64,
    /// Greedy design weight; `2μ - μ²` when absent.
    pub gamma: Option<f64>,
    /// VISR hop count; `⌈N / 2k⌉` when absent.
    pub p: Option<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Node locations are drawn once from this seed and shared by all runs.
    pub layout_seed: u64,
    pub learn: LearnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 100,
            r: DEFAULT_RANGE,
            variance: DEFAULT_VARIANCE,
            train_count: 1000,
            test_count: 100,
            budgets: vec![5, 10, 15, 20, 30, 40, 50],
            sigma_levels: vec![0.1, 0.5, 1.0],
            mu: DEFAULT_MU,
            gamma: None,
            p: None,
            methods: vec![
                Method::Greedy,
                Method::Vis,
                Method::Visr,
                Method::RandomL,
                Method::RandomLq,
            ],
            seeds: (0..10).collect(),
            layout_seed: 0,
            learn: LearnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.n < 2 || self.n > crate::io::MAX_VERTICES {
            return Err(Error::BadSize(self.n));
        }
        if self.train_count == 0 || self.test_count == 0 {
            return invalid("train_count and test_count must be >= 1");
        }
        if self.budgets.is_empty() || self.sigma_levels.is_empty() {
            return invalid("budgets and sigma_levels must be nonempty");
        }
        if self.methods.is_empty() || self.seeds.is_empty() {
            return invalid("methods and seeds must be nonempty");
        }
        for &k in &self.budgets {
            if k == 0 || k > self.n {
                return Err(Error::BadBudget { k, n: self.n });
            }
        }
        if self.sigma_levels.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return invalid("noise levels must be finite and nonnegative");
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return invalid("mu must be positive");
        }
        if !(self.r > 0.0) {
            return Err(Error::DegenerateRange(self.r));
        }
        if !(self.variance > 0.0) {
            return invalid("variance must be positive");
        }
        if self.gamma.is_some_and(|g| !(g > 0.0)) || self.p == Some(0) {
            return invalid("gamma must be positive and p >= 1");
        }
        let mut seen = std::collections::HashSet::new();
        if !self.methods.iter().all(|m| seen.insert(*m)) {
            return invalid("duplicate method");
        }
        let mut seen = std::collections::HashSet::new();
        if !self.seeds.iter().all(|s| seen.insert(*s)) {
            return invalid("duplicate seed");
        }
        let mut seen = std::collections::HashSet::new();
        if !self.budgets.iter().all(|b| seen.insert(*b)) {
            return invalid("duplicate budget");
        }
        self.learn.validate()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn design_gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| gamma_from_mu(self.mu))
    }

    pub fn expected_rows(&self) -> usize {
        self.methods.len() * self.budgets.len() * self.sigma_levels.len() * self.seeds.len()
    }

    fn needs_cgl(&self) -> bool {
        self.methods.iter().any(|m| !m.uses_importance())
    }

    fn needs_ddgl(&self) -> bool {
        self.methods.iter().any(|m| m.uses_importance())
    }
}

// Stream ids for seed derivation.
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_RANDOM_SET: u64 = 4;

/// Learned graphs for one seed.
#[derive(Debug, Clone)]
pub struct SeedModels {
    pub empirical_covariance: DenseSymMatrix,
    pub cgl: Option<(GraphModel, LearnTrace)>,
    pub ddgl: Option<(GraphModel, LearnTrace)>,
}

impl SeedModels {
    pub fn model_for(&self, method: Method) -> Result<&GraphModel> {
        let m = if method.uses_importance() {
            self.ddgl.as_ref()
        } else {
            self.cgl.as_ref()
        }
        .map(|(g, _)| g);
        m.ok_or_else(|| Error::InvalidParameter(format!("no model learned for {}", method.tag())))
    }
}

/// True GP covariance on the configured layout.
pub fn true_covariance(cfg: &ExperimentConfig) -> Result<DenseSymMatrix> {
    let layout = generate_layout(cfg.n, cfg.layout_seed)?;
    gp_covariance(&layout, cfg.r, cfg.variance)
}

/// Draws the training signals for `seed` and learns the graphs the configured methods need.
pub fn learn_models(cfg: &ExperimentConfig, cov: &DenseSymMatrix, seed: u64) -> Result<SeedModels> {
    let train = sample_gaussian_signals(cov, cfg.train_count, derive_seed(seed, STREAM_TRAIN))?;
    let s = empirical_covariance(&train)?;
    let cgl = if cfg.needs_cgl() {
        Some(learn_cgl(&s, &cfg.learn).map_err(|e| e.context(format!("seed {seed}: learn_cgl")))?)
    } else {
        None
    };
    let ddgl = if cfg.needs_ddgl() {
        Some(
            learn_ddgl(&s, &cfg.learn)
                .map_err(|e| e.context(format!("seed {seed}: learn_ddgl")))?,
        )
    } else {
        None
    };
    Ok(SeedModels {
        empirical_covariance: s,
        cgl,
        ddgl,
    })
}

/// Sampling set of size `k` for `method`.
pub fn select(
    cfg: &ExperimentConfig,
    models: &SeedModels,
    method: Method,
    k: usize,
    seed: u64,
) -> Result<SamplingSet> {
    let model = models.model_for(method)?;
    match method {
        Method::Greedy | Method::GreedyCgl => {
            let omega = model.operator(method.uses_importance())?;
            let mut set = greedy_doptimal(&omega, k, cfg.design_gamma())?;
            set.method = method.tag().into();
            Ok(set)
        }
        Method::Vis => vis_select(model, k),
        Method::Visr => visr_select(model, k, cfg.p),
        Method::RandomL | Method::RandomLq => {
            // Same set for both operators at a given (seed, k).
            let s = derive_seed(derive_seed(seed, STREAM_RANDOM_SET), k as u64);
            let mut set = random_select_fixed(model.n(), k, s)?;
            set.method = method.tag().into();
            Ok(set)
        }
    }
}

/// `(1/M) Σ_k (1/N) ‖f̂_k - f_k‖²`.
pub fn average_mse(reconstructed: &[Vec<f64>], originals: &[Vec<f64>]) -> Result<f64> {
    if reconstructed.len() != originals.len() || originals.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} reconstructions for {} originals",
            reconstructed.len(),
            originals.len()
        )));
    }
    let mut total = 0.0;
    for (k, (a, b)) in reconstructed.iter().zip(originals).enumerate() {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "signal {k}: lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        total += sq / a.len() as f64;
    }
    Ok(total / originals.len() as f64)
}

/// Intersection size and Jaccard index of two sets (Jaccard of two empty sets is 1).
pub fn overlap_report(a: &SamplingSet, b: &SamplingSet) -> (usize, f64) {
    use std::collections::HashSet;
    let sa: HashSet<usize> = a.indices.iter().copied().collect();
    let sb: HashSet<usize> = b.indices.iter().copied().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    let jaccard = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };
    (inter, jaccard)
}

/// Smallest hop distance between two distinct members of `set`
/// (`usize::MAX` when no pair is connected or the set has fewer than 2 members).
pub fn min_pairwise_hops(model: &GraphModel, set: &SamplingSet) -> usize {
    let nbrs = model.neighbours();
    let mut best = usize::MAX;
    for (a, &i) in set.indices.iter().enumerate() {
        let dist = crate::graph::bfs(&nbrs, i);
        for &j in &set.indices[a + 1..] {
            if let Some(d) = dist[j] {
                best = best.min(d);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub budget: usize,
    pub sigma: f64,
    pub seed: u64,
    pub mse: f64,
    /// Wall time of the sampling-set selection alone.
    pub select_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<CellResult>,
    pub config_hash: String,
    pub code_version: String,
}

fn run_seed(cfg: &ExperimentConfig, cov: &DenseSymMatrix, seed: u64) -> Result<Vec<CellResult>> {
    let models = learn_models(cfg, cov, seed)?;
    let test = sample_gaussian_signals(cov, cfg.test_count, derive_seed(seed, STREAM_TEST))?;
    let noisy: Vec<SignalBatch> = cfg
        .sigma_levels
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            add_noise(&test, sigma, derive_seed(derive_seed(seed, STREAM_NOISE), si as u64))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.methods.len() * cfg.budgets.len() * noisy.len());
    for &method in &cfg.methods {
        for &k in &cfg.budgets {
            let cell = |e: Error| e.context(format!("cell {} k={k} seed={seed}", method.tag()));
            let start = Instant::now();
            let set = select(cfg, &models, method, k, seed).map_err(cell)?;
            let select_seconds = start.elapsed().as_secs_f64();
            let omega = models
                .model_for(method)?
                .operator(method.uses_importance())
                .map_err(cell)?;
            let solver = GlrSolver::new(&omega, &set, cfg.mu).map_err(cell)?;
            for (batch, &sigma) in noisy.iter().zip(&cfg.sigma_levels) {
                let recon = batch
                    .signals
                    .iter()
                    .map(|y| solver.solve_from_full(y))
                    .collect::<Result<Vec<_>>>()
                    .map_err(cell)?;
                let mse = average_mse(&recon, &test.signals).map_err(cell)?;
                rows.push(CellResult {
                    method,
                    budget: k,
                    sigma,
                    seed,
                    mse,
                    select_seconds,
                });
            }
        }
    }
    Ok(rows)
}

fn position<T: PartialEq>(list: &[T], x: T) -> usize {
    list.iter().position(|y| *y == x).unwrap_or(0)
}

/// Runs every (method, budget, sigma, seed) cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let cov = true_covariance(cfg)?;
    let per_seed: Vec<Vec<CellResult>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &cov, seed))
        .collect::<Result<_>>()?;

    let mut rows: Vec<CellResult> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| {
        (
            position(&cfg.methods, r.method),
            position(&cfg.budgets, r.budget),
            cfg.sigma_levels
                .iter()
                .position(|s| s.to_bits() == r.sigma.to_bits())
                .unwrap_or(0),
            position(&cfg.seeds, r.seed),
        )
    });
    Ok(ExperimentResult {
        rows,
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub budget: usize,
    pub sigma: f64,
    pub mean_mse: f64,
    pub stderr: f64,
    pub seeds: usize,
}

/// Mean and standard error over seeds for each (method, budget, sigma), in row order.
pub fn summarize(result: &ExperimentResult) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in &result.rows {
        let idx = out.iter().position(|s| {
            s.method == r.method && s.budget == r.budget && s.sigma.to_bits() == r.sigma.to_bits()
        });
        match idx {
            Some(i) => values[i].push(r.mse),
            None => {
                out.push(SummaryRow {
                    method: r.method,
                    budget: r.budget,
                    sigma: r.sigma,
                    mean_mse: 0.0,
                    stderr: 0.0,
                    seeds: 0,
                });
                values.push(vec![r.mse]);
            }
        }
    }
    for (row, v) in out.iter_mut().zip(&values) {
        let m = v.len() as f64;
        let mean = v.iter().sum::<f64>() / m;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        row.mean_mse = mean;
        row.stderr = (var / m).sqrt();
        row.seeds = v.len();
    }
    out
}

pub fn results_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("method,budget,sigma,seed,mse\n");
    for r in &result.rows {
        writeln!(out, "{},{},{},{},{}", r.method.tag(), r.budget, r.sigma, r.seed, r.mse)
            .expect("writing to a String cannot fail");
    }
    out
}

pub fn timings_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("method,budget,seed,select_seconds\n");
    let mut seen = std::collections::HashSet::new();
    for r in &result.rows {
        if seen.insert((r.method, r.budget, r.seed)) {
            writeln!(out, "{},{},{},{}", r.method.tag(), r.budget, r.seed, r.select_seconds)
                .expect("writing to a String cannot fail");
        }
    }
    out
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from("method,budget,sigma,mean_mse,stderr,seeds\n");
    for s in summary {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.method.tag(),
            s.budget,
            s.sigma,
            s.mean_mse,
            s.stderr,
            s.seeds
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Plot-ready table for one noise level: `budget,<method>,<method>_stderr,...`.
pub fn series_csv(cfg: &ExperimentConfig, summary: &[SummaryRow], sigma: f64) -> String {
    let mut out = String::from("budget");
    for m in &cfg.methods {
        write!(out, ",{0},{0}_stderr", m.tag()).expect("writing to a String cannot fail");
    }
    out.push('\n');
    for &k in &cfg.budgets {
        write!(out, "{k}").expect("writing to a String cannot fail");
        for &m in &cfg.methods {
            let row = summary.iter().find(|s| {
                s.method == m && s.budget == k && s.sigma.to_bits() == sigma.to_bits()
            });
            match row {
                Some(s) => write!(out, ",{},{}", s.mean_mse, s.stderr),
                None => write!(out, ",,"),
            }
            .expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Minimal line chart of mean MSE against budget for one noise level.
pub fn svg_chart(cfg: &ExperimentConfig, summary: &[SummaryRow], sigma: f64) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let pts: Vec<&SummaryRow> = summary
        .iter()
        .filter(|s| s.sigma.to_bits() == sigma.to_bits())
        .collect();
    let kmax = cfg.budgets.iter().copied().max().unwrap_or(1) as f64;
    let kmin = cfg.budgets.iter().copied().min().unwrap_or(0) as f64;
    let ymax = pts.iter().map(|s| s.mean_mse).fold(0.0f64, f64::max).max(1e-12);
    let x = |k: f64| pad + (k - kmin) / (kmax - kmin).max(1.0) * (w - 2.0 * pad);
    let y = |v: f64| h - pad - v / ymax * (h - 2.0 * pad);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">mean MSE vs budget (sigma = {sigma})</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{0}" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(svg, r#"<text x="{pad}" y="{}">0</text>"#, h - pad + 15.0);
    let _ = writeln!(svg, r#"<text x="5" y="{pad}">{ymax:.3}</text>"#);
    for &k in &cfg.budgets {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{k}</text>"#,
            x(k as f64),
            h - pad + 15.0
        );
    }
    for (mi, &m) in cfg.methods.iter().enumerate() {
        let colour = PALETTE[mi % PALETTE.len()];
        let mut line: Vec<(f64, f64)> = pts
            .iter()
            .filter(|s| s.method == m)
            .map(|s| (x(s.budget as f64), y(s.mean_mse)))
            .collect();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = line.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            w - pad - 80.0,
            pad + 15.0 * mi as f64,
            m.tag()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes results, timings, summary, per-sigma series (and optional SVGs) plus
/// `run.json` metadata into `dir`. Returns the paths written.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    result: &ExperimentResult,
    emit_svg: bool,
    elapsed_seconds: f64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let summary = summarize(result);
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        atomic_write(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    put("results.csv".into(), results_csv(result))?;
    put("timings.csv".into(), timings_csv(result))?;
    put("summary.csv".into(), summary_csv(&summary))?;
    for &sigma in &cfg.sigma_levels {
        put(format!("series_sigma_{sigma}.csv"), series_csv(cfg, &summary, sigma))?;
        if emit_svg {
            put(format!("mse_vs_budget_sigma_{sigma}.svg"), svg_chart(cfg, &summary, sigma))?;
        }
    }
    let generated_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "config": cfg,
        "config_hash": result.config_hash,
        "code_version": result.code_version,
        "rows": result.rows.len(),
        "elapsed_seconds": elapsed_seconds,
        "generated_at_unix": generated_at,
    });
    put(
        "run.json".into(),
        serde_json::to_string_pretty(&meta).expect("metadata serialises"),
    )?;
    Ok(written)
}
