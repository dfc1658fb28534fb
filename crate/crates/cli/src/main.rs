use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::RngCore;

use facelock_core::error::Error;
use facelock_core::eval::{self, BenchRow};
use facelock_core::ingestion::{self, Dataset, SyntheticSpec};
use facelock_core::linalg::FeatureVector;
use facelock_core::pipeline::{self, SystemConfig};
use facelock_core::security;
use facelock_core::store::Store;

/// Exit codes: 0 accept/success, 1 biometric reject, >= 2 error.
const EXIT_REJECT: u8 = 1;
const EXIT_NOT_FOUND: u8 = 2;
const EXIT_DIMENSION: u8 = 3;
const EXIT_INTEGRITY: u8 = 4;
const EXIT_POLICY: u8 = 5;
const EXIT_INPUT: u8 = 6;
const EXIT_OTHER: u8 = 7;

#[derive(Parser)]
#[command(name = "facelock", about = "Cancelable face-template protection pipeline", version)]
struct Cli {
    /// Template store directory.
    #[arg(long, global = true, default_value = "store")]
    store: PathBuf,

    /// Flat key = value config file; CLI flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; defaults to OS entropy.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for report files.
    #[arg(long, global = true, default_value = ".")]
    output: PathBuf,

    /// Populate per-stage diagnostics (never set in production).
    #[arg(long, global = true)]
    eval_mode: bool,

    #[command(flatten)]
    overrides: ConfigOverrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigOverrides {
    /// Feature vector length l.
    #[arg(long, global = true)]
    l: Option<usize>,
    /// Cancelable template length l_r.
    #[arg(long, global = true)]
    l_r: Option<usize>,
    /// Binary template length n.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Repetition factor rho (odd, divides n).
    #[arg(long, global = true)]
    rho: Option<u16>,
    /// Minimum codeword distance.
    #[arg(long, global = true)]
    d_min: Option<usize>,
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    /// Train one shared multi-class model (evaluation harness mode).
    #[arg(long, global = true)]
    multi_class: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Enroll a user from labeled CSV samples.
    Enroll {
        #[arg(long)]
        user: String,
        /// Feature CSV; rows labeled with the user id are used.
        #[arg(long)]
        data: PathBuf,
    },
    /// Verify a probe against a stored record.
    Verify {
        #[arg(long)]
        user: String,
        /// CSV file; the first row's numeric fields are the probe vector.
        #[arg(long)]
        probe: PathBuf,
    },
    /// Revoke a user's active record.
    Revoke {
        #[arg(long)]
        user: String,
    },
    /// Per-stage matching-score evaluation (writes text + CSV reports).
    Eval {
        #[command(flatten)]
        source: DataSource,
        /// Cap on full-pipeline impostor trials (0 = all pairs).
        #[arg(long, default_value_t = 0)]
        impostor_limit: usize,
    },
    /// Verification timing report over one or more datasets.
    Bench {
        /// Dataset as name=path.csv; repeatable. Default: two synthetic sets.
        #[arg(long = "data")]
        data: Vec<String>,
        #[arg(long, default_value_t = 30)]
        repetitions: usize,
    },
    /// Security-strength report (measured, with optional literal Kc rows).
    Security {
        /// Literal Kc override as stage=Kc (aliases: rp, bda, fc, full).
        #[arg(long = "paper-kc")]
        paper_kc: Vec<String>,
        #[arg(long, default_value_t = 8)]
        password_length: u32,
    },
    /// Write a synthetic dataset as feature CSV.
    GenData {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        r: usize,
        // field name must not collide with the global `l` override id
        #[arg(long = "len", default_value_t = 256)]
        len: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma_within: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_between: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataSource {
    /// Feature CSV path; omit to use a synthetic dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    r: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma_within: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_between: f64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NotFound { .. } => EXIT_NOT_FOUND,
        Error::Dimension { .. } => EXIT_DIMENSION,
        Error::Integrity(_) => EXIT_INTEGRITY,
        Error::Policy(_) => EXIT_POLICY,
        Error::Parse { .. } | Error::Structural(_) | Error::Ingest(_) => EXIT_INPUT,
        _ => EXIT_OTHER,
    }
}

fn parse_config_file(path: &Path) -> Result<SystemConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut config = default_config();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: i + 1,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Parse { row: i + 1, msg: format!("bad {what} value {value:?}") };
        match key {
            "l" => config.l = value.parse().map_err(|_| bad("l"))?,
            "l_r" => config.l_r = value.parse().map_err(|_| bad("l_r"))?,
            "n" => config.n = value.parse().map_err(|_| bad("n"))?,
            "rho" => config.rho = value.parse().map_err(|_| bad("rho"))?,
            "d_min" => config.d_min = value.parse().map_err(|_| bad("d_min"))?,
            "max_epochs" => config.max_epochs = value.parse().map_err(|_| bad("max_epochs"))?,
            "learning_rate" => {
                config.learning_rate = value.parse().map_err(|_| bad("learning_rate"))?
            }
            "hash" => config.hash_name = value.to_string(),
            "multi_class" => config.multi_class = value.parse().map_err(|_| bad("multi_class"))?,
            other => {
                return Err(Error::Parse { row: i + 1, msg: format!("unknown config key {other:?}") })
            }
        }
    }
    Ok(config)
}

fn default_config() -> SystemConfig {
    SystemConfig::new(256, 64, 40, 5)
}

fn resolve_config(cli: &Cli) -> Result<SystemConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => default_config(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.l {
        config.l = v;
    }
    if let Some(v) = o.l_r {
        config.l_r = v;
    }
    if let Some(v) = o.n {
        config.n = v;
    }
    if let Some(v) = o.rho {
        config.rho = v;
    }
    if let Some(v) = o.d_min {
        config.d_min = v;
    }
    if let Some(v) = o.max_epochs {
        config.max_epochs = v;
    }
    if let Some(v) = o.learning_rate {
        config.learning_rate = v;
    }
    if o.multi_class {
        config.multi_class = true;
    }
    config.validate()?;
    Ok(config)
}

fn master_seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or_else(|| rand::rngs::OsRng.next_u64())
}

fn load_probe(path: &Path, expected_l: usize) -> Result<FeatureVector, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", path.display())))?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Structural(format!("{} is empty", path.display())))?;
    let fields: Vec<&str> = line.split(',').collect();
    // allow an optional leading label field
    let numeric_start = usize::from(fields[0].trim().parse::<f64>().is_err());
    let values: Vec<f64> = fields[numeric_start..]
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse { row: 1, msg: format!("non-numeric field {f:?}") })
        })
        .collect::<Result<_, _>>()?;
    if values.len() != expected_l {
        return Err(Error::Dimension { what: "probe", expected: expected_l, actual: values.len() });
    }
    FeatureVector::new(values)
}

fn synthetic(source: &DataSource, config: &SystemConfig, seed: u64) -> Result<Dataset, Error> {
    let spec = SyntheticSpec {
        k: source.k,
        r: source.r,
        l: config.l,
        sigma_within: source.sigma_within,
        sigma_between: source.sigma_between,
        seed,
    };
    ingestion::generate_synthetic(&spec)
}

fn write_report(dir: &Path, name: &str, content: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Enroll { user, data } => {
            let dataset = ingestion::load_feature_csv(data)?;
            let group = dataset
                .classes()
                .iter()
                .find(|g| &g.label == user)
                .ok_or_else(|| Error::Structural(format!("no rows labeled {user:?} in {}", data.display())))?;
            let mut cfg = config.clone();
            cfg.l = dataset.l();
            cfg.validate()?;
            let seed = master_seed(cli);
            let store = Store::open(&cli.store)?;
            let record = pipeline::enroll(user, &group.samples, &cfg, seed)?;
            if store.known_projection_seeds(user)?.contains(&record.projection_seed) {
                return Err(Error::Policy(format!("projection seed reuse for user {user:?}")));
            }
            store.put(&record)?;
            println!("ENROLLED {user} (r = {} samples, seed = {seed})", group.samples.len());
            Ok(0)
        }
        Command::Verify { user, probe } => {
            let store = Store::open(&cli.store)?;
            let record = store.get(user)?;
            let probe = load_probe(probe, record.config.l)?;
            let decision = pipeline::authenticate_with_mode(&probe, &record, cli.eval_mode)?;
            if decision.accepted {
                println!("ACCEPT {user}");
                if let Some(d) = decision.stage_diagnostics {
                    println!(
                        "  binary_similarity = {}, corrected_errors = {:?}",
                        d.binary_similarity, d.corrected_errors
                    );
                }
                Ok(0)
            } else {
                println!("REJECT {user}");
                Ok(EXIT_REJECT)
            }
        }
        Command::Revoke { user } => {
            let store = Store::open(&cli.store)?;
            store.revoke(user)?;
            println!("REVOKED {user}");
            Ok(0)
        }
        Command::Eval { source, impostor_limit } => {
            let seed = master_seed(cli);
            let (dataset, cfg) = match &source.data {
                Some(path) => {
                    let ds = ingestion::load_feature_csv(path)?;
                    let mut cfg = config.clone();
                    cfg.l = ds.l();
                    (ds, cfg)
                }
                None => (synthetic(source, &config, seed)?, config.clone()),
            };
            cfg.validate()?;
            let report = eval::run_eval(&dataset, &cfg, seed, *impostor_limit)?;
            print!("{}", report.to_text());
            let p1 = write_report(&cli.output, "eval_stages.csv", &report.to_stage_csv())?;
            let p2 = write_report(&cli.output, "eval_comparison.csv", &report.to_comparison_csv())?;
            let p3 = write_report(&cli.output, "eval.txt", &report.to_text())?;
            eprintln!("wrote {}, {}, {}", p1.display(), p2.display(), p3.display());
            Ok(0)
        }
        Command::Bench { data, repetitions } => {
            let seed = master_seed(cli);
            let mut rows: Vec<BenchRow> = Vec::new();
            if data.is_empty() {
                for (name, k) in [("synthetic-a", 4usize), ("synthetic-b", 8)] {
                    let spec = SyntheticSpec {
                        k,
                        r: 4,
                        l: config.l,
                        sigma_within: 0.1,
                        sigma_between: 1.0,
                        seed,
                    };
                    let ds = ingestion::generate_synthetic(&spec)?;
                    rows.push(eval::run_bench(name, &ds, &config, seed, *repetitions)?);
                }
            } else {
                for entry in data {
                    let (name, path) = entry.split_once('=').ok_or_else(|| {
                        Error::Parse { row: 0, msg: format!("--data expects name=path, got {entry:?}") }
                    })?;
                    let ds = ingestion::load_feature_csv(Path::new(path))?;
                    let mut cfg = config.clone();
                    cfg.l = ds.l();
                    cfg.validate()?;
                    rows.push(eval::run_bench(name, &ds, &cfg, seed, *repetitions)?);
                }
            }
            println!("{:<16} {:>12} {:>12} {:>6}", "dataset", "mean_ms", "stddev_ms", "reps");
            for r in &rows {
                println!("{:<16} {:>12.3} {:>12.3} {:>6}", r.dataset, r.mean_ms, r.stddev_ms, r.repetitions);
            }
            let p = write_report(&cli.output, "bench.csv", &eval::bench_csv(&rows))?;
            eprintln!("wrote {}", p.display());
            Ok(0)
        }
        Command::Security { paper_kc, password_length } => {
            let mut overrides = Vec::new();
            for entry in paper_kc {
                let (stage, kc) = entry.split_once('=').ok_or_else(|| {
                    Error::Parse { row: 0, msg: format!("--paper-kc expects stage=Kc, got {entry:?}") }
                })?;
                let stage = match stage {
                    "rp" => "random_projection",
                    "fc" => "fuzzy_commitment",
                    other => other,
                }
                .to_string();
                let kc: u64 = kc
                    .parse()
                    .map_err(|_| Error::Parse { row: 0, msg: format!("bad Kc value {kc:?}") })?;
                overrides.push((stage, kc));
            }
            let report =
                security::strength_report_with_overrides(&config, *password_length, &overrides)?;
            print!("{}", report.to_text());
            let p = write_report(&cli.output, "security.csv", &report.to_csv())?;
            eprintln!("wrote {}", p.display());
            Ok(0)
        }
        Command::GenData { k, r, len, sigma_within, sigma_between, out } => {
            let spec = SyntheticSpec {
                k: *k,
                r: *r,
                l: *len,
                sigma_within: *sigma_within,
                sigma_between: *sigma_between,
                seed: master_seed(cli),
            };
            let dataset = ingestion::generate_synthetic(&spec)?;
            dataset.write_csv(out)?;
            println!("wrote {} ({} classes x {} samples, l = {})", out.display(), k, r, len);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
