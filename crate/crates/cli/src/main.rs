#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use vissample::bench::{run_experiment, write_outputs, ExperimentConfig};
use vissample::io::{
    atomic_write, parse_graph_json, parse_matrix_csv, parse_sampling_set_json,
    parse_signals_csv, write_graph_json, write_layout_json, write_matrix_csv,
    write_sampling_set_json, write_signals_csv,
};
use vissample::learn::{learn_cgl, learn_ddgl, LearnConfig};
use vissample::reconstruct::{GlrSolver, DEFAULT_MU};
use vissample::sampler::{
    gamma_from_mu, greedy_doptimal, random_select_bernoulli, random_select_fixed, vis_select,
    visr_select,
};
use vissample::synth::{
    add_noise, derive_seed, generate_layout, gp_covariance, sample_gaussian_signals,
    DEFAULT_RANGE, DEFAULT_VARIANCE,
};
use vissample::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "vissample", version, about = "Graph learning and sampling-set selection for graph signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a node layout, its GP covariance and train/test signals.
    GenData {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_RANGE)]
        r: f64,
        #[arg(long, default_value_t = DEFAULT_VARIANCE)]
        variance: f64,
        #[arg(long, default_value_t = 1000)]
        num_train: usize,
        #[arg(long, default_value_t = 100)]
        num_test: usize,
        /// Noise level added to the test signals (written to test_noisy.csv).
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Learn a CGL or DDGL from a covariance CSV.
    Learn {
        #[arg(long)]
        cov: PathBuf,
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        max_sweeps: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a sampling set on a graph.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        method: SampleMethod,
        #[arg(long)]
        k: usize,
        /// Greedy design weight; derived from --mu when absent.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MU)]
        mu: f64,
        /// VISR hop count override.
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct signals from the samples on a set.
    Reconstruct {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        set: PathBuf,
        /// One signal per row: either full length N or one value per set member.
        #[arg(long)]
        signals: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MU)]
        mu: f64,
        /// Regularise with L + Q instead of L.
        #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
        use_q: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the reconstruction benchmark.
    Bench {
        /// ExperimentConfig JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        emit_svg: bool,
        /// Worker threads (default: logical processors).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelKind {
    Cgl,
    Ddgl,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SampleMethod {
    Greedy,
    Vis,
    Visr,
    Random,
    Bernoulli,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    atomic_write(path, body.as_bytes()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn gen_data(
    n: usize,
    r: f64,
    variance: f64,
    num_train: usize,
    num_test: usize,
    sigma: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<serde_json::Value> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let layout = generate_layout(n, seed)?;
    let cov = gp_covariance(&layout, r, variance)?;
    let train = sample_gaussian_signals(&cov, num_train, derive_seed(seed, 1))?;
    let test = sample_gaussian_signals(&cov, num_test, derive_seed(seed, 2))?;
    let noisy = add_noise(&test, sigma, derive_seed(seed, 3))?;
    fs::create_dir_all(out_dir)?;
    write(&out_dir.join("layout.json"), &write_layout_json(&layout))?;
    write(&out_dir.join("covariance.csv"), &write_matrix_csv(&cov))?;
    write(&out_dir.join("train.csv"), &write_signals_csv(&train.signals))?;
    write(&out_dir.join("test.csv"), &write_signals_csv(&test.signals))?;
    write(&out_dir.join("test_noisy.csv"), &write_signals_csv(&noisy.signals))?;
    Ok(json!({
        "command": "gen-data",
        "n": n,
        "train": num_train,
        "test": num_test,
        "out_dir": out_dir,
    }))
}

fn learn(
    cov: &Path,
    model: ModelKind,
    max_sweeps: Option<usize>,
    tol: Option<f64>,
    out: &Path,
) -> Result<serde_json::Value> {
    let s = parse_matrix_csv(&read(cov)?)?;
    let mut cfg = LearnConfig::default();
    if let Some(m) = max_sweeps {
        cfg.max_sweeps = m;
    }
    if let Some(t) = tol {
        cfg.obj_tol = t;
    }
    let (graph, trace) = match model {
        ModelKind::Cgl => learn_cgl(&s, &cfg)?,
        ModelKind::Ddgl => learn_ddgl(&s, &cfg)?,
    };
    write(out, &write_graph_json(&graph))?;
    Ok(json!({
        "command": "learn",
        "objective": trace.final_objective(),
        "sweeps": trace.sweeps_used,
        "converged": trace.converged,
        "edges": graph.num_edges(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn sample(
    graph: &Path,
    method: SampleMethod,
    k: usize,
    gamma: Option<f64>,
    mu: f64,
    p: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<serde_json::Value> {
    let model = parse_graph_json(&read(graph)?)?;
    let n = model.n();
    let set = match method {
        SampleMethod::Greedy => {
            if !(mu > 0.0 && mu <= 1.0) && gamma.is_none() {
                return Err(Error::InvalidParameter(format!("mu must be in (0, 1], got {mu}")));
            }
            let omega = model.operator(model.vertex_importance().is_some())?;
            greedy_doptimal(&omega, k, gamma.unwrap_or_else(|| gamma_from_mu(mu)))?
        }
        SampleMethod::Vis => vis_select(&model, k)?,
        SampleMethod::Visr => visr_select(&model, k, p)?,
        SampleMethod::Random => random_select_fixed(n, k, seed)?,
        SampleMethod::Bernoulli => {
            if k == 0 || k > n {
                return Err(Error::BadBudget { k, n });
            }
            // Expected size k.
            random_select_bernoulli(n, k as f64 / n as f64, seed)?
        }
    };
    write(out, &write_sampling_set_json(&set))?;
    Ok(json!({
        "command": "sample",
        "method": set.method,
        "size": set.len(),
        "indices": set.indices,
    }))
}

fn reconstruct(
    graph: &Path,
    set: &Path,
    signals: &Path,
    mu: f64,
    use_q: bool,
    out: &Path,
) -> Result<serde_json::Value> {
    let model = parse_graph_json(&read(graph)?)?;
    let n = model.n();
    let set = parse_sampling_set_json(&read(set)?, Some(n))?;
    let rows = parse_signals_csv(&read(signals)?)?;
    let omega = model.operator(use_q)?;
    let solver = GlrSolver::new(&omega, &set, mu)?;
    let width = rows[0].len();
    let recon = rows
        .iter()
        .map(|y| {
            if width == n {
                solver.solve_from_full(y)
            } else {
                solver.solve(y)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    write(out, &write_signals_csv(&recon))?;
    Ok(json!({
        "command": "reconstruct",
        "signals": recon.len(),
        "n": n,
        "samples": set.len(),
    }))
}

fn bench(
    config: Option<&Path>,
    out_dir: &Path,
    emit_svg: bool,
    jobs: Option<usize>,
) -> Result<serde_json::Value> {
    let cfg = match config {
        Some(path) => ExperimentConfig::from_json(&read(path)?)?,
        None => ExperimentConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::InvalidParameter("--jobs must be >= 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let result = pool.install(|| run_experiment(&cfg))?;
    let elapsed = start.elapsed().as_secs_f64();
    let files = write_outputs(out_dir, &cfg, &result, emit_svg, elapsed)?;
    Ok(json!({
        "command": "bench",
        "rows": result.rows.len(),
        "config_hash": result.config_hash,
        "files": files.len(),
        "elapsed_seconds": elapsed,
    }))
}

fn dispatch(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::GenData {
            n,
            r,
            variance,
            num_train,
            num_test,
            sigma,
            seed,
            out_dir,
        } => gen_data(n, r, variance, num_train, num_test, sigma, seed, &out_dir),
        Command::Learn {
            cov,
            model,
            max_sweeps,
            tol,
            out,
        } => learn(&cov, model, max_sweeps, tol, &out),
        Command::Sample {
            graph,
            method,
            k,
            gamma,
            mu,
            p,
            seed,
            out,
        } => sample(&graph, method, k, gamma, mu, p, seed, &out),
        Command::Reconstruct {
            graph,
            set,
            signals,
            mu,
            use_q,
            out,
        } => reconstruct(&graph, &set, &signals, mu, use_q, &out),
        Command::Bench {
            config,
            out_dir,
            emit_svg,
            jobs,
        } => bench(config.as_deref(), &out_dir, emit_svg, jobs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
