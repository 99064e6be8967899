//! `coordetect` command-line harness.
//!
//! Exit codes: 0 success (or H0 from `detect`), 3 H1, 2 usage or data error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::afriat::{afriat_matrix, eval_utility, reconstruct_utility};
use crate::detector::{
    generate_clean, run_detector, run_trial, DetectorReport, Hypothesis, Regime, DEFAULT_L,
    DEFAULT_TOL, NOISE_STREAM,
};
use crate::error::{Error, Result};
use crate::forward::{add_noise, GenerationConfig, GenerationMode, ProbeLaw};
use crate::model::{
    fmt_f64, read_dataset, write_dataset, BudgetSpec, NoiseModel, Response, SimplexWeights,
    UtilityKind,
};
use crate::rng::{child_seed, substream};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_H1: i32 = 3;

pub const DEFAULT_GAMMA: f64 = 0.05;
pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_SIGMAS: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.3];
/// Reconstruction grid: `GRID_N × GRID_N` points on `[GRID_LO, GRID_HI]²`.
pub const GRID_N: usize = 50;
pub const GRID_LO: f64 = 0.01;
pub const GRID_HI: f64 = 1.0;

const GENERATION_FILE: &str = "generation.json";

#[derive(Debug, Parser)]
#[command(
    name = "coordetect",
    version,
    about = "Generate and test radar-network coordination data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clean and a noisy dataset.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, conflicts_with = "noncoordinated")]
        coordinated: bool,
        #[arg(long)]
        noncoordinated: bool,
    },
    /// Run the coordination detector on a dataset and write a JSON report.
    #[command(allow_negative_numbers = true)]
    Detect {
        dataset: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate reconstructed utilities from a report on a grid.
    #[command(allow_negative_numbers = true)]
    Reconstruct {
        dataset: PathBuf,
        report: PathBuf,
        /// Generation metadata written by `simulate`; adds the true utilities.
        #[arg(long)]
        generator: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Mean detector statistic over a noise grid for both regimes.
    #[command(allow_negative_numbers = true)]
    Sweep {
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    BudgetShare,
    JointAscent,
}

impl From<ModeArg> for GenerationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::BudgetShare => GenerationMode::BudgetShare,
            ModeArg::JointAscent => GenerationMode::JointAscent,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with default values for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "T")]
    pub t_len: Option<usize>,
    #[arg(long = "M")]
    pub m_len: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma_assumed: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a `--config` file. Keys mirror the flag names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub t_len: Option<usize>,
    #[serde(rename = "M")]
    pub m_len: Option<usize>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub sigma_assumed: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<ModeArg>,
    pub out: Option<PathBuf>,
    pub sigmas: Option<Vec<f64>>,
    pub regime: Option<Regime>,
}

/// Flags layered over the config file, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub t_len: usize,
    pub m_len: usize,
    pub n: usize,
    pub sigma: Option<f64>,
    pub sigma_assumed: Option<f64>,
    pub gamma: f64,
    pub l: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: GenerationMode,
    pub out: Option<PathBuf>,
    pub sigmas: Vec<f64>,
    pub regime: Regime,
}

impl Settings {
    pub fn resolve(args: &CommonArgs, file: ExperimentConfig) -> Result<Self> {
        let s = Self {
            t_len: args.t_len.or(file.t_len).unwrap_or(10),
            m_len: args.m_len.or(file.m_len).unwrap_or(3),
            n: args.n.or(file.n).unwrap_or(2),
            sigma: args.sigma.or(file.sigma),
            sigma_assumed: args.sigma_assumed.or(file.sigma_assumed),
            gamma: args.gamma.or(file.gamma).unwrap_or(DEFAULT_GAMMA),
            l: args.l.or(file.l).unwrap_or(DEFAULT_L),
            trials: args.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
            seed: args.seed.or(file.seed).unwrap_or(0),
            mode: args
                .mode
                .or(file.mode)
                .map_or(GenerationMode::BudgetShare, Into::into),
            out: args.out.clone().or(file.out),
            sigmas: file.sigmas.unwrap_or_else(|| DEFAULT_SIGMAS.to_vec()),
            regime: file.regime.unwrap_or(Regime::Coordinated),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.t_len == 0 || self.m_len == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("T, M and n must all be >= 1".into()));
        }
        for (name, v) in [("sigma", self.sigma), ("sigma-assumed", self.sigma_assumed)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "{name} must be >= 0, got {v}"
                    )));
                }
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.l == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument("L and trials must be >= 1".into()));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "noise grid must be nonempty and >= 0: {:?}",
                self.sigmas
            )));
        }
        Ok(())
    }

    /// Generator for `M` agents: objectives cycle through det, trace and
    /// sqrt-prod with raw weights (0.4, 0.4, 0.3) repeating, normalized.
    pub fn generation(&self) -> Result<GenerationConfig> {
        let kinds = [UtilityKind::Det, UtilityKind::Trace, UtilityKind::SqrtProd];
        let raw = [0.4, 0.4, 0.3];
        let cfg = GenerationConfig {
            t_len: self.t_len,
            m_len: self.m_len,
            n: self.n,
            probe_law: ProbeLaw::default(),
            utilities: (0..self.m_len).map(|i| kinds[i % 3].clone()).collect(),
            weights: SimplexWeights::normalized(
                &(0..self.m_len).map(|i| raw[i % 3]).collect::<Vec<_>>(),
            )?,
            budget: BudgetSpec::default(),
            mode: self.mode,
            seed: self.seed,
        };
        Ok(cfg)
    }
}

fn load_settings(
    common: &CommonArgs,
    patch: impl FnOnce(&mut ExperimentConfig),
) -> Result<Settings> {
    let mut file = match &common.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    patch(&mut file);
    Settings::resolve(common, file)
}

/// Written next to simulated datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub regime: Regime,
    pub seed: u64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub t_len: usize,
    #[serde(rename = "M")]
    pub m_len: usize,
    pub n: usize,
    /// Present for coordinated data.
    pub generation: Option<GenerationConfig>,
    pub clean: String,
    pub noisy: Option<String>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate {
            common,
            coordinated,
            noncoordinated,
        } => {
            let s = load_settings(&common, |f| {
                if coordinated {
                    f.regime = Some(Regime::Coordinated);
                } else if noncoordinated {
                    f.regime = Some(Regime::Noncoordinated);
                }
            })?;
            cmd_simulate(&s)
        }
        Command::Detect { dataset, common } => {
            let s = load_settings(&common, |_| {})?;
            cmd_detect(&dataset, &s)
        }
        Command::Reconstruct {
            dataset,
            report,
            generator,
            common,
        } => {
            let s = load_settings(&common, |_| {})?;
            cmd_reconstruct(&dataset, &report, generator.as_deref(), &s)
        }
        Command::Sweep { sigmas, common } => {
            let s = load_settings(&common, |f| {
                if sigmas.is_some() {
                    f.sigmas = sigmas;
                }
            })?;
            cmd_sweep(&s)
        }
    }
}

fn read_input(path: &Path) -> Result<crate::model::ProbeResponseDataset> {
    if !path.is_file() {
        return Err(Error::InvalidArgument(format!(
            "cannot read dataset {}",
            path.display()
        )));
    }
    read_dataset(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_simulate(s: &Settings) -> Result<i32> {
    let sigma = s.sigma.unwrap_or(0.0);
    let noise = NoiseModel::gaussian(sigma)?;
    let gen = s.generation()?;
    if s.regime == Regime::Coordinated {
        gen.validate()?;
    }
    let clean = generate_clean(s.regime, &gen, s.seed)?;
    let dir = s.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    fs::create_dir_all(&dir)?;
    write_dataset(&clean, dir.join("clean.csv"))?;
    let noisy_name = if sigma > 0.0 {
        let noisy = add_noise(&clean, &noise, &mut substream(s.seed, NOISE_STREAM))?;
        write_dataset(&noisy, dir.join("noisy.csv"))?;
        Some("noisy.csv".to_string())
    } else {
        None
    };
    let record = GenerationRecord {
        regime: s.regime,
        seed: s.seed,
        sigma,
        t_len: s.t_len,
        m_len: s.m_len,
        n: s.n,
        generation: (s.regime == Regime::Coordinated).then(|| gen.clone()),
        clean: "clean.csv".into(),
        noisy: noisy_name,
    };
    write_json(&dir.join(GENERATION_FILE), &record)?;

    println!("seed {}", s.seed);
    println!("regime {}", s.regime.name());
    let p_star = gen.budget.p_star();
    let gap = (0..clean.t_len())
        .map(|t| {
            let spend: f64 = clean
                .responses_at(t)
                .iter()
                .map(|b| clean.probe(t).spend(b))
                .sum();
            (spend - p_star).abs()
        })
        .fold(0.0, f64::max);
    match s.regime {
        Regime::Coordinated => println!("budget saturation: max |spend - p*| = {}", fmt_f64(gap)),
        Regime::Noncoordinated => println!(
            "budget saturation: not applicable (max |spend - p*| = {})",
            fmt_f64(gap)
        ),
    }
    println!("wrote {}", dir.display());
    Ok(EXIT_OK)
}

/// Assumed noise level: the flag, then `--sigma`, then `generation.json` next
/// to the dataset.
fn assumed_sigma(dataset: &Path, s: &Settings) -> Result<f64> {
    if let Some(v) = s.sigma_assumed.or(s.sigma) {
        return Ok(v);
    }
    let meta = dataset
        .parent()
        .unwrap_or(Path::new("."))
        .join(GENERATION_FILE);
    if let Ok(text) = fs::read_to_string(&meta) {
        let record: GenerationRecord = serde_json::from_str(&text)?;
        if record.sigma > 0.0 {
            return Ok(record.sigma);
        }
    }
    Err(Error::InvalidArgument(
        "no assumed noise level: pass --sigma-assumed".into(),
    ))
}

pub fn cmd_detect(dataset: &Path, s: &Settings) -> Result<i32> {
    let ds = read_input(dataset)?;
    let sigma = assumed_sigma(dataset, s)?;
    let report = run_detector(
        &ds,
        &NoiseModel::gaussian(sigma)?,
        s.gamma,
        s.l,
        s.seed,
        DEFAULT_TOL,
    )?;
    let out = s
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("report.json"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_json(&out, &report)?;
    println!("phi_star {}", fmt_f64(report.phi_star));
    println!("statistic {}", fmt_f64(report.statistic));
    println!("decision {:?}", report.hypothesis);
    Ok(match report.hypothesis {
        Hypothesis::H0 => EXIT_OK,
        Hypothesis::H1 => EXIT_H1,
    })
}

/// Grid coordinates `GRID_LO + k·(GRID_HI − GRID_LO)/(GRID_N − 1)`.
pub fn grid_axis() -> Vec<f64> {
    let step = (GRID_HI - GRID_LO) / (GRID_N - 1) as f64;
    (0..GRID_N).map(|k| GRID_LO + k as f64 * step).collect()
}

fn write_grid(path: &Path, utility: &UtilityKind) -> Result<()> {
    let axis = grid_axis();
    let mut text = String::from("beta_1,beta_2,value\n");
    for &b1 in &axis {
        for &b2 in &axis {
            let v = eval_utility(utility, &Response(vec![b1, b2]))?;
            text.push_str(&format!("{},{},{}\n", fmt_f64(b1), fmt_f64(b2), fmt_f64(v)));
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_reconstruct(
    dataset: &Path,
    report_path: &Path,
    generator: Option<&Path>,
    s: &Settings,
) -> Result<i32> {
    let ds = read_input(dataset)?;
    let report: DetectorReport =
        serde_json::from_str(&fs::read_to_string(report_path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read report {}: {e}", report_path.display()))
        })?)?;
    if ds.n_dim() != 2 {
        return Err(Error::Unsupported(format!(
            "grid output needs n = 2, dataset has n = {}",
            ds.n_dim()
        )));
    }
    if report.certificates.len() != ds.m_len() || report.phi_per_radar.len() != ds.m_len() {
        return Err(Error::Dimension(format!(
            "report covers {} radars, dataset has {}",
            report.certificates.len(),
            ds.m_len()
        )));
    }
    let truth = match generator {
        Some(p) => {
            let record: GenerationRecord = serde_json::from_str(&fs::read_to_string(p)?)?;
            let gen = record.generation.ok_or_else(|| {
                Error::InvalidArgument(format!("{} records no generator", p.display()))
            })?;
            if gen.utilities.len() != ds.m_len() {
                return Err(Error::Dimension(
                    "generator and dataset disagree on M".into(),
                ));
            }
            Some(gen.utilities)
        }
        None => None,
    };

    let dir = s
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("reconstruction"));
    fs::create_dir_all(&dir)?;
    for (i, cert) in report.certificates.iter().enumerate() {
        if cert.agent != i {
            return Err(Error::InvalidArgument(format!(
                "certificate {} is labelled radar {}",
                i + 1,
                cert.agent + 1
            )));
        }
        let u = reconstruct_utility(cert, &ds)?;
        let a = afriat_matrix(&ds, i)?;
        let scale = 1.0
            + cert
                .u
                .iter()
                .chain(&cert.lambda)
                .fold(0.0f64, |m, v| m.max(v.abs()));
        if cert.max_violation(&a, report.phi_per_radar[i].max(0.0)) > 1e-6 * scale {
            return Err(Error::InvalidArgument(format!(
                "report certificate for radar {} does not fit this dataset",
                i + 1
            )));
        }
        write_grid(&dir.join(format!("radar_{}.csv", i + 1)), &u)?;
        if let Some(t) = &truth {
            write_grid(&dir.join(format!("radar_{}_true.csv", i + 1)), &t[i])?;
        }
    }
    let label = if ds.noisy() {
        "heuristic reconstruction"
    } else {
        "exact reconstruction"
    };
    write_json(
        &dir.join("reconstruction.json"),
        &serde_json::json!({ "label": label, "radars": ds.m_len(), "grid": GRID_N, "true_utilities": truth.is_some() }),
    )?;
    println!("{label}");
    println!("wrote {}", dir.display());
    Ok(EXIT_OK)
}

/// One output row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub regime: Regime,
    pub mean: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std: f64,
    pub trials: usize,
}

/// Trial `k` in every cell uses seed `child_seed(seed, k)`.
pub fn sweep(s: &Settings) -> Result<Vec<SweepRow>> {
    let gen = s.generation()?;
    gen.validate()?;
    let regimes = [Regime::Coordinated, Regime::Noncoordinated];
    let jobs: Vec<(usize, Regime, usize)> = (0..s.sigmas.len())
        .flat_map(|g| {
            regimes
                .iter()
                .flat_map(move |&r| (0..s.trials).map(move |k| (g, r, k)))
        })
        .collect();
    let stats = jobs
        .par_iter()
        .map(|&(g, regime, k)| {
            let noise = NoiseModel::gaussian(s.sigmas[g])?;
            run_trial(
                regime,
                &gen,
                &noise,
                s.gamma,
                s.l,
                child_seed(s.seed, k as u64),
                DEFAULT_TOL,
            )
            .map(|d| d.statistic)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(stats
        .chunks(s.trials)
        .zip(
            s.sigmas
                .iter()
                .flat_map(|&sg| regimes.iter().map(move |&r| (sg, r))),
        )
        .map(|(cell, (sigma, regime))| {
            let n = cell.len() as f64;
            let mean = cell.iter().sum::<f64>() / n;
            let var = if cell.len() > 1 {
                cell.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SweepRow {
                sigma,
                regime,
                mean,
                std: var.sqrt(),
                trials: cell.len(),
            }
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut text = String::from("sigma,regime,mean_statistic,std_statistic,trials\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.sigma),
            r.regime.name(),
            fmt_f64(r.mean),
            fmt_f64(r.std),
            r.trials
        ));
    }
    text
}

pub fn cmd_sweep(s: &Settings) -> Result<i32> {
    let rows = sweep(s)?;
    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&out, sweep_csv(&rows))?;
    for r in &rows {
        println!(
            "sigma {:<6} {:<15} mean {:.4} std {:.4}",
            r.sigma,
            r.regime.name(),
            r.mean,
            r.std
        );
    }
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}
