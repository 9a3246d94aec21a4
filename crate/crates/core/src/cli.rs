//! Command dispatch and result files.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 solver error. A stable configuration is a normal result.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Command, ConfigError, RunConfig};
use crate::error::Error;
use crate::growth::{solve_growth_rate, GrowthResult, NeutralBracket, ResidualReport, Verdict};
use crate::model::{Layer, RTParameters, WaveVector};
use crate::discretize::Grids;
use crate::spectrum::ZeroLimit;
use crate::thresholds::{
    critical_coefficient, discriminant, poincare_constant, set_coefficient, surface_tension_threshold,
    vertical_field_threshold, ThresholdReport,
};
use crate::ENGINE_VERSION;

#[derive(Debug, Parser)]
#[command(name = "rtgrowth", version, about = "Rayleigh-Taylor growth rates and stability thresholds")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// output directory (overrides `output_dir`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// worker threads, 0 = one per core (overrides `threads`)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver error: {0}")]
    Solver(#[from] Error),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub engine_version: String,
    pub command: Command,
    pub degree: usize,
    pub lattice_k_max: u32,
    pub lattice_adaptive: bool,
    pub tol: f64,
    /// seconds since the unix epoch; the only nondeterministic field
    pub timestamp: u64,
}

/// `GrowthResult` without the nodal profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub verdict: Verdict,
    pub lambda: Option<f64>,
    pub critical_wavevector: Option<WaveVector>,
    pub frak_j: Option<NeutralBracket>,
    pub alpha_at_lambda: Option<f64>,
    pub fixed_point_defect: Option<f64>,
    pub pressure_consistency: Option<f64>,
    pub residual_report: Option<ResidualReport>,
    pub zero_limit: ZeroLimit,
    pub lattice_k_max: u32,
    pub iterations: Vec<(f64, f64)>,
}

impl From<&GrowthResult> for GrowthSummary {
    fn from(r: &GrowthResult) -> Self {
        Self {
            verdict: r.verdict,
            lambda: r.lambda,
            critical_wavevector: r.critical_wavevector,
            frak_j: r.frak_j,
            alpha_at_lambda: r.alpha_at_lambda,
            fixed_point_defect: r.fixed_point_defect(),
            pressure_consistency: r.pressure_consistency,
            residual_report: r.residual_report,
            zero_limit: r.zero_limit,
            lattice_k_max: r.lattice_k_max,
            iterations: r.iterations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForms {
    pub poincare_const: f64,
    pub a_const: f64,
    pub vartheta_t: Option<f64>,
    pub m_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub coefficient: String,
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub verdict: Verdict,
    pub lambda: Option<f64>,
    pub dis: Option<f64>,
    pub dis_infinite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub provenance: Provenance,
    pub parameters: RTParameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminant: Option<ThresholdReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ClosedForms>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical: Option<CriticalValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub results: ResultsFile,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn closed_forms(p: &RTParameters) -> Result<ClosedForms, Error> {
    let no_kappa = p.kappa_plus == 0.0 && p.kappa_minus == 0.0;
    Ok(ClosedForms {
        poincare_const: poincare_constant(p.l, p.tau)?,
        a_const: (p.l1 * p.l1).max(p.l2 * p.l2),
        vartheta_t: (no_kappa && p.m_bar == [0.0; 3])
            .then(|| surface_tension_threshold(p.g, p.rho_jump(), p.l1, p.l2))
            .transpose()?,
        m_s: (p.vartheta == 0.0 && no_kappa && p.lambda > 0.0)
            .then(|| vertical_field_threshold(p.g, p.rho_jump(), p.lambda, p.l, p.tau))
            .transpose()?,
    })
}

fn growth_line(r: &GrowthResult) -> String {
    match (r.verdict, r.lambda, r.critical_wavevector) {
        (Verdict::Unstable, Some(l), Some(w)) => {
            format!("unstable: Lambda = {l:.10e} at k = ({}, {})", w.k1, w.k2)
        }
        _ => format!("stable: min E = {:.6e}", r.zero_limit.value),
    }
}

fn mode_csv(p: &RTParameters, r: &GrowthResult) -> Option<String> {
    let (w, beta) = (r.eigenprofile.as_ref()?, r.pressure_profile.as_ref()?);
    let grids = Grids::for_params(p, w.degree);
    let mut s = String::from("layer,y3,re_phi,im_phi,re_psi,im_psi,re_theta,im_theta,re_beta,im_beta\n");
    for layer in Layer::BOTH {
        let lp = w.layer(layer);
        let name = match layer {
            Layer::Minus => "minus",
            Layer::Plus => "plus",
        };
        for (j, &y) in grids.get(layer).y.iter().enumerate() {
            let b = beta.eval(layer, y);
            let _ = writeln!(
                s,
                "{name},{},{},{},{},{},{},{},{},{}",
                num(y),
                num(lp.phi[j].re),
                num(lp.phi[j].im),
                num(lp.psi[j].re),
                num(lp.psi[j].im),
                num(lp.theta[j].re),
                num(lp.theta[j].im),
                num(b.re),
                num(b.im),
            );
        }
    }
    Some(s)
}

fn sweep_csv(coefficient: &str, rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let bad = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record([coefficient, "verdict", "lambda", "dis"]).map_err(bad)?;
    for r in rows {
        let verdict = match r.verdict {
            Verdict::Unstable => "unstable",
            Verdict::Stable => "stable",
            Verdict::Neutral => "neutral",
        };
        let lambda = r.lambda.map(num).unwrap_or_default();
        let dis = if r.dis_infinite {
            "inf".to_string()
        } else {
            r.dis.map(num).unwrap_or_default()
        };
        w.write_record([num(r.value), verdict.into(), lambda, dis]).map_err(bad)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Run `command` with the given configuration file.
pub fn execute(
    command: Command,
    config_path: &Path,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<Outcome, CliError> {
    let (cfg, bytes) = RunConfig::load(config_path)?;
    cfg.validate_for(command)?;
    let p = cfg.parameters()?;
    let threads = threads.unwrap_or(cfg.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(ConfigError { field: "threads".into(), message: e.to_string() }))?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    pool.install(|| run(command, &cfg, &p, &bytes, &out_dir))
}

fn run(command: Command, cfg: &RunConfig, p: &RTParameters, bytes: &[u8], out_dir: &Path) -> Result<Outcome, CliError> {
    let lattice = cfg.lattice.lattice();
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut results = ResultsFile {
        provenance: Provenance {
            config_sha256: hex::encode(Sha256::digest(bytes)),
            engine_version: ENGINE_VERSION.to_string(),
            command,
            degree: cfg.degree,
            lattice_k_max: cfg.lattice.k_max,
            lattice_adaptive: cfg.lattice.adaptive,
            tol: cfg.tol,
            timestamp,
        },
        parameters: *p,
        growth: None,
        discriminant: None,
        thresholds: None,
        critical: None,
        sweep: None,
    };
    let mut extra: Vec<(&str, Vec<u8>)> = Vec::new();
    let summary = match command {
        Command::Growth | Command::ModeShape => {
            let r = solve_growth_rate(p, &lattice, cfg.degree, cfg.tol)?;
            results.growth = Some(GrowthSummary::from(&r));
            let mut line = growth_line(&r);
            if command == Command::ModeShape {
                match mode_csv(p, &r) {
                    Some(csv) => extra.push(("mode.csv", csv.into_bytes())),
                    None => line.push_str(" (no mode to write)"),
                }
            }
            line
        }
        Command::Dis => {
            let rep = discriminant(p, &lattice, cfg.degree)?;
            let line = match rep.dis_value {
                Some(d) => format!("Dis = {d:.10e} ({:?})", rep.verdict).to_lowercase(),
                None => "Dis = inf (unstable)".to_string(),
            };
            results.discriminant = Some(rep);
            line
        }
        Command::Threshold => {
            let cf = closed_forms(p)?;
            let mut line = format!("poincare = {:.10e}", cf.poincare_const);
            if let Some(v) = cf.vartheta_t {
                let _ = write!(line, ", vartheta_T = {v:.10e}");
            }
            if let Some(v) = cf.m_s {
                let _ = write!(line, ", m_S = {v:.10e}");
            }
            if let Some(t) = &cfg.threshold {
                let v = critical_coefficient(p, &t.coefficient, (t.lo, t.hi), &lattice, cfg.degree, t.tol)?;
                let _ = write!(line, ", critical {} = {v:.10e}", t.coefficient);
                results.critical = Some(CriticalValue {
                    coefficient: t.coefficient.clone(),
                    lo: t.lo,
                    hi: t.hi,
                    value: v,
                });
            }
            results.thresholds = Some(cf);
            line
        }
        Command::Sweep => {
            let s = cfg.sweep.as_ref().expect("validated");
            let mut rows = Vec::with_capacity(s.steps);
            for v in s.grid() {
                let q = set_coefficient(p, &s.coefficient, v)
                    .and_then(|q| crate::model::validate_parameters(&q))
                    .map_err(|e| ConfigError { field: "sweep".into(), message: format!("at {v}: {e}") })?;
                let g = solve_growth_rate(&q, &lattice, cfg.degree, cfg.tol)?;
                let d = discriminant(&q, &lattice, cfg.degree)?;
                rows.push(SweepRow {
                    value: v,
                    verdict: g.verdict,
                    lambda: g.lambda,
                    dis: d.dis_value,
                    dis_infinite: d.dis_infinite,
                });
            }
            extra.push(("sweep.csv", sweep_csv(&s.coefficient, &rows)?));
            let unstable = rows.iter().filter(|r| r.verdict == Verdict::Unstable).count();
            let line = format!("sweep over {}: {unstable} of {} points unstable", s.coefficient, rows.len());
            results.sweep = Some(rows);
            line
        }
    };
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut files = Vec::new();
    let json = serde_json::to_vec_pretty(&results).map_err(|e| CliError::Io(e.to_string()))?;
    let path = out_dir.join("results.json");
    write_file(&path, &json)?;
    files.push(path);
    for (name, data) in extra {
        let path = out_dir.join(name);
        write_file(&path, &data)?;
        files.push(path);
    }
    Ok(Outcome { summary, files, results })
}

/// Parse arguments, run, print the summary; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, &cli.config, cli.out.as_deref(), cli.threads) {
        Ok(o) => {
            println!("{}: {}", cli.command.name(), o.summary);
            0
        }
        Err(e) => {
            eprintln!("rtgrowth: {e}");
            e.exit_code()
        }
    }
}
