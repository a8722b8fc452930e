//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or invalid parameters, 2 I/O failure,
//! 3 processing failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::batch::{process_dataset, quality_inputs_from_manifest, quality_report, QualityInput};
use crate::dataset::{scan_dataset, split_dataset, DatasetManifest, DEFAULT_RATIOS, DEFAULT_SEED};
use crate::error::Error;
use crate::metrics::{compare_reports, load_metrics_file, Averaging, ClaimedMaxima};
use crate::pipeline::{enhance, ConfigFile, PipelineConfig, PipelineMode};
use crate::quality::ScoreModel;
use crate::raster::{load_image, save_image};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PROCESSING: i32 = 3;

const DEFAULTS_HELP: &str = "Defaults:
  mode        hybrid (original | pmd | clahe | hybrid)
  iterations  20
  kappa       20
  lambda      0.25 (must be in (0, 0.25])
  clip-limit  2.0
  grid        8x8
  ratios      0.8,0.1,0.1
  seed        42

Exit codes: 0 ok, 1 usage, 2 I/O, 3 processing.";

#[derive(Debug, Parser)]
#[command(name = "pap-enhance", version, about = "PMD / CLAHE / hybrid enhancement for cytology images", after_help = DEFAULTS_HELP)]
pub struct Cli {
    /// JSON config file; command-line flags take precedence over it
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Print machine-readable JSON on stdout
    #[arg(long, global = true)]
    pub json: bool,

    /// Print timings and progress on stderr
    #[arg(short, long, global = true)]
    pub verbose: bool,

    /// Worker threads [default: available parallelism]
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance one image and write it as PNG
    #[command(after_help = DEFAULTS_HELP)]
    Enhance {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Enhance a class-per-directory dataset into a mirrored tree
    #[command(after_help = DEFAULTS_HELP)]
    Batch {
        /// Dataset root (uses its manifest.json when present) or a manifest file
        dataset: PathBuf,
        out_root: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Assign train/val/test splits and write manifest.json at the dataset root
    #[command(after_help = DEFAULTS_HELP)]
    Split {
        root: PathBuf,
        /// Shuffle seed [default: 42]
        #[arg(long)]
        seed: Option<u64>,
        /// train,val,test fractions [default: 0.8,0.1,0.1]
        #[arg(long, value_name = "A,B,C")]
        ratios: Option<String>,
    },
    /// Contrast-quality features for images or manifests
    #[command(after_help = DEFAULTS_HELP)]
    Quality {
        /// Image files and/or manifest.json files
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Linear score model (JSON); without it only features are reported
        #[arg(long)]
        model: Option<PathBuf>,
        /// Mode label for plain image inputs [default: original]
        #[arg(long, default_value = "original", hide_default_value = true)]
        label: String,
        /// Directory for quality.csv and quality.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare metrics of two preprocessing modes, architecture by architecture
    #[command(after_help = DEFAULTS_HELP)]
    Compare {
        /// Metrics files of the baseline mode
        #[arg(long, num_args = 1.., required = true)]
        baseline: Vec<PathBuf>,
        /// Metrics files of the candidate mode
        #[arg(long, num_args = 1.., required = true)]
        candidate: Vec<PathBuf>,
        /// Claimed maximum improvements to check against
        #[arg(long)]
        claims: Option<PathBuf>,
        /// Class averaging for metrics computed from confusion matrices [default: macro]
        #[arg(long, value_name = "macro|weighted")]
        averaging: Option<String>,
        /// Also write the comparison JSON here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print version and a fingerprint of the default parameters
    #[command(after_help = DEFAULTS_HELP)]
    Version,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamFlags {
    /// Enhancement mode: original, pmd, clahe, hybrid [default: hybrid]
    #[arg(long)]
    pub mode: Option<String>,
    /// Diffusion iterations [default: 20]
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Diffusion contrast parameter [default: 20]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Diffusion time step, at most 0.25 [default: 0.25]
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// CLAHE clip limit, multiple of the mean bin height [default: 2.0]
    #[arg(long)]
    pub clip_limit: Option<f64>,
    /// CLAHE tile grid as COLSxROWS [default: 8x8]
    #[arg(long)]
    pub grid: Option<String>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            _ if e.is_io() => EXIT_IO,
            Error::InvalidParameter(_)
            | Error::UnmatchedArchitecture(_)
            | Error::Malformed { .. }
            | Error::ModelMismatch(_) => EXIT_USAGE,
            _ => EXIT_PROCESSING,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), CliError>;

fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).map(str::trim).collect();
    match parts.as_slice() {
        [c, r] => match (c.parse(), r.parse()) {
            (Ok(c), Ok(r)) => Ok((c, r)),
            _ => Err(CliError::usage(format!("invalid grid '{s}', expected COLSxROWS"))),
        },
        _ => Err(CliError::usage(format!("invalid grid '{s}', expected COLSxROWS"))),
    }
}

fn parse_ratios(s: &str) -> Result<[f64; 3], CliError> {
    let values: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("invalid ratios '{s}', expected A,B,C")))?;
    <[f64; 3]>::try_from(values)
        .map_err(|_| CliError::usage(format!("invalid ratios '{s}', expected three values")))
}

/// Defaults, then the config file, then explicit flags.
fn resolve_config(config: Option<&Path>, flags: &ParamFlags) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = config {
        ConfigFile::load(path)?.apply_to(&mut cfg);
    }
    if let Some(mode) = &flags.mode {
        cfg.mode = mode.parse::<PipelineMode>()?;
    }
    if let Some(v) = flags.iterations {
        cfg.pmd.iterations = v;
    }
    if let Some(v) = flags.kappa {
        cfg.pmd.kappa = v;
    }
    if let Some(v) = flags.lambda {
        cfg.pmd.lambda = v;
    }
    if let Some(v) = flags.clip_limit {
        cfg.clahe.clip_limit = v;
    }
    if let Some(g) = &flags.grid {
        let (cols, rows) = parse_grid(g)?;
        cfg.clahe.grid_cols = cols;
        cfg.clahe.grid_rows = rows;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Hex SHA-256 prefix of the canonical default configuration.
pub fn defaults_fingerprint() -> String {
    let doc = serde_json::json!({
        "pipeline": PipelineConfig::default().to_file(),
        "ratios": DEFAULT_RATIOS,
        "seed": DEFAULT_SEED,
    });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_or_scan(dataset: &Path) -> crate::error::Result<DatasetManifest> {
    if dataset.is_file() {
        return DatasetManifest::load(dataset);
    }
    let manifest = dataset.join("manifest.json");
    if manifest.is_file() {
        let mut m = DatasetManifest::load(&manifest)?;
        m.root = dataset.to_path_buf();
        Ok(m)
    } else {
        scan_dataset(dataset)
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    let jobs = cli.jobs.unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let emit = |out: &mut dyn Write, text: &str| {
        let _ = out.write_all(text.as_bytes());
    };

    match cli.command {
        Command::Enhance {
            input,
            output,
            params,
        } => {
            let cfg = resolve_config(cli.config.as_deref(), &params)?;
            let t0 = Instant::now();
            let image = load_image(&input)?;
            let t1 = Instant::now();
            let enhanced = enhance(&image, &cfg)?;
            let t2 = Instant::now();
            save_image(&enhanced, &output)?;
            let t3 = Instant::now();
            if cli.verbose {
                eprintln!(
                    "load {:.1} ms, {} {:.1} ms, save {:.1} ms",
                    (t1 - t0).as_secs_f64() * 1e3,
                    cfg.mode,
                    (t2 - t1).as_secs_f64() * 1e3,
                    (t3 - t2).as_secs_f64() * 1e3
                );
            }
            if cli.json {
                let doc = serde_json::json!({
                    "input": input,
                    "output": output,
                    "config": cfg.to_file(),
                });
                emit(out, &format!("{doc}\n"));
            }
        }
        Command::Batch {
            dataset,
            out_root,
            params,
        } => {
            let cfg = resolve_config(cli.config.as_deref(), &params)?;
            let manifest = load_or_scan(&dataset)?;
            let report = process_dataset(&manifest, &cfg, &out_root, jobs)?;
            eprintln!(
                "{}: {} ok, {} failed -> {}",
                cfg.mode,
                report.ok,
                report.failed,
                out_root.display()
            );
            if cli.verbose {
                for r in report.records.iter().filter(|r| r.error.is_some()) {
                    eprintln!("  failed {}: {}", r.path, r.error.as_deref().unwrap_or(""));
                }
            }
            if cli.json {
                emit(out, &(serde_json::to_string_pretty(&report).expect("serializes") + "\n"));
            }
        }
        Command::Split { root, seed, ratios } => {
            let ratios = match ratios {
                Some(s) => parse_ratios(&s)?,
                None => DEFAULT_RATIOS,
            };
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let scanned = scan_dataset(&root)?;
            let manifest = split_dataset(&scanned, ratios, seed)?;
            manifest.save(root.join("manifest.json"))?;
            for (c, name) in manifest.classes.iter().enumerate() {
                let (tr, va, te) = manifest.split_counts(c);
                eprintln!("{name}: train {tr}, val {va}, test {te}");
            }
            if cli.json {
                emit(out, &manifest.to_json());
            }
        }
        Command::Quality {
            inputs,
            model,
            label,
            out: out_dir,
        } => {
            let model = model.map(ScoreModel::load).transpose()?;
            let mut items = Vec::new();
            for path in inputs {
                let is_manifest = path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("json"));
                if is_manifest {
                    items.extend(quality_inputs_from_manifest(&DatasetManifest::load(&path)?));
                } else {
                    items.push(QualityInput {
                        path,
                        mode: label.clone(),
                    });
                }
            }
            let report = quality_report(&items, model.as_ref(), jobs)?;
            for f in &report.failures {
                eprintln!("failed {}: {}", f.path, f.error);
            }
            let json = serde_json::to_string_pretty(&report).expect("serializes") + "\n";
            let csv = report.to_csv();
            if let Some(dir) = out_dir {
                write_file(&dir.join("quality.csv"), &csv)?;
                write_file(&dir.join("quality.json"), &json)?;
            }
            emit(out, if cli.json { &json } else { &csv });
        }
        Command::Compare {
            baseline,
            candidate,
            claims,
            averaging,
            out: out_file,
        } => {
            let averaging = match averaging.as_deref() {
                None | Some("macro") => Averaging::Macro,
                Some("weighted") => Averaging::Weighted,
                Some(other) => {
                    return Err(CliError::usage(format!(
                        "unknown averaging '{other}', expected macro or weighted"
                    )))
                }
            };
            let load_all = |files: &[PathBuf]| -> Result<Vec<_>, CliError> {
                let mut all = Vec::new();
                for f in files {
                    all.extend(load_metrics_file(f, averaging)?);
                }
                Ok(all)
            };
            let a = load_all(&baseline)?;
            let b = load_all(&candidate)?;
            let mut report = compare_reports(&a, &b)?;
            if let Some(path) = claims {
                report.check_claims(&ClaimedMaxima::load(path)?);
            }
            let json = serde_json::to_string_pretty(&report).expect("serializes") + "\n";
            if let Some(path) = out_file {
                write_file(&path, &json)?;
            }
            for d in &report.discrepancies {
                eprintln!(
                    "warning: claimed max {} improvement {:.2} differs from computed {:.2} ({})",
                    d.metric.name(),
                    d.claimed,
                    d.computed,
                    d.architecture
                );
            }
            let text = if cli.json { json } else { report.to_table() };
            emit(out, &text);
        }
        Command::Version => {
            let version = env!("CARGO_PKG_VERSION");
            let fp = defaults_fingerprint();
            if cli.json {
                let doc = serde_json::json!({ "version": version, "defaults_fingerprint": fp });
                emit(out, &format!("{doc}\n"));
            } else {
                emit(out, &format!("pap-enhance {version} (defaults {fp})\n"));
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_ratio_parsing() {
        assert_eq!(parse_grid("8x8").unwrap(), (8, 8));
        assert_eq!(parse_grid("4,2").unwrap(), (4, 2));
        assert!(parse_grid("8").is_err());
        assert_eq!(parse_ratios("0.8,0.1,0.1").unwrap(), [0.8, 0.1, 0.1]);
        assert!(parse_ratios("0.8,0.2").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.json");
        std::fs::write(&cfg_path, r#"{"mode":"pmd","pmd":{"iterations":5,"kappa":30}}"#).unwrap();
        let flags = ParamFlags {
            kappa: Some(10.0),
            ..Default::default()
        };
        let cfg = resolve_config(Some(&cfg_path), &flags).unwrap();
        assert_eq!(cfg.mode, PipelineMode::Pmd);
        assert_eq!(cfg.pmd.iterations, 5);
        assert_eq!(cfg.pmd.kappa, 10.0);
        assert_eq!(cfg.pmd.lambda, 0.25);
    }

    #[test]
    fn error_codes() {
        let io: CliError = Error::FileNotFound { path: "x".into() }.into();
        assert_eq!(io.code, EXIT_IO);
        let usage: CliError = Error::InvalidParameter("x".into()).into();
        assert_eq!(usage.code, EXIT_USAGE);
        let proc_: CliError = Error::EmptyMatrix.into();
        assert_eq!(proc_.code, EXIT_PROCESSING);
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(defaults_fingerprint(), defaults_fingerprint());
        assert_eq!(defaults_fingerprint().len(), 16);
    }
}
