//! `gist`: dataset generation, cross-validated evaluation, the α sweep,
//! spectra exports and theorem checks.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gist_core::data::{
    dataset_hash, generate, load_dataset, save_dataset_with_metadata, Family, GenSpec,
};
use gist_core::eval::{
    run_cv, spectra_analysis, sweep_alpha, verify_dataset, write_evaluation, write_spectra_csv,
    write_sweep_csv, write_theorem_csv, write_theorem_json, CvConfig, Metadata, FIDELITY, GED,
    ORACLE_CALLS, SPARSITY, VALIDITY,
};
use gist_core::explainer::{GistConfig, OvershootStrategy, SampleMode};
use gist_core::{Dataset, GistError, LaplacianKind};

/// Environment variable holding the default output directory.
const OUT_DIR_ENV: &str = "GIST_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "gist-out";
/// Exit code when a provable spectral property is violated.
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gist",
    version,
    about = "Backtracking graph counterfactual explanations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and print its content hash.
    Gen(GenArgs),
    /// Cross-validate GIST and iRand; writes one CSV per fold plus aggregates.
    Evaluate(EvaluateArgs),
    /// Train one model per α on the first fold and report mean edit distances.
    SweepAlpha(SweepArgs),
    /// Per-pair Laplacian spectra of explained test graphs.
    Spectra(SpectraArgs),
    /// Check the interpolation properties on label pairs of a dataset.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Output directory, created if absent.
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// ba-shapes, tree-cycle or color-count.
    #[arg(long)]
    family: Family,
    /// Number of graphs.
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    min_nodes: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Number of classes (color-count only).
    #[arg(long)]
    classes: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset JSON file.
    #[arg(long)]
    dataset: PathBuf,
    /// Root seed; every other seed is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight of the content term in the loss.
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// GIST training epochs.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// deterministic or bernoulli.
    #[arg(long, default_value = "deterministic")]
    mode: SampleMode,
    /// combinatorial or normalized.
    #[arg(long, default_value = "normalized")]
    laplacian: LaplacianKind,
    /// random or smart.
    #[arg(long, default_value = "random")]
    overshoot: OvershootStrategy,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated α grid.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    alphas: Vec<f64>,
}

#[derive(Args)]
struct SpectraArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of explained test graphs to report (all when omitted).
    #[arg(long)]
    k_pairs: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[command(flatten)]
    out: OutArgs,
}

impl RunArgs {
    fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            gist: GistConfig {
                alpha: self.alpha,
                epochs: self.epochs,
                mode: self.mode,
                laplacian: self.laplacian,
                overshoot: self.overshoot,
                ..GistConfig::default()
            },
            seed: self.seed,
            ..CvConfig::default()
        }
    }
}

type CliResult<T> = Result<T, GistError>;

struct Loaded {
    data: Dataset,
    hash: String,
}

fn load(path: &Path) -> CliResult<Loaded> {
    let data = load_dataset(path)?;
    let hash = dataset_hash(&data)?;
    Ok(Loaded { data, hash })
}

fn metadata(
    command: &str,
    path: &Path,
    loaded: &Loaded,
    seed: u64,
    config: &impl Serialize,
) -> CliResult<Metadata> {
    Metadata::new()
        .with("tool", concat!("gist ", env!("CARGO_PKG_VERSION")))?
        .with("command", command)?
        .with("dataset", path.display().to_string())?
        .with("dataset_name", &loaded.data.name)?
        .with("dataset_hash", &loaded.hash)?
        .with("seed", seed)?
        .with("config", config)
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> CliResult<ExitCode> {
    let mut spec = GenSpec::new(args.family, args.n, args.seed);
    if let Some(v) = args.min_nodes {
        spec.min_nodes = v;
    }
    if let Some(v) = args.max_nodes {
        spec.max_nodes = v;
    }
    if let Some(v) = args.classes {
        spec.num_classes = v;
    }
    let data = generate(&spec)?;
    let hash = dataset_hash(&data)?;
    create_out(&args.out.out)?;
    let path = args.out.out.join(format!(
        "{}-{}-{}.json",
        spec.family.name(),
        spec.num_graphs,
        spec.seed
    ));
    let meta = Metadata::new()
        .with("tool", concat!("gist ", env!("CARGO_PKG_VERSION")))?
        .with("command", "gen")?
        .with("seed", spec.seed)?
        .with("config", &spec)?
        .with("dataset_hash", &hash)?;
    save_dataset_with_metadata(&data, meta.to_json(), &path)?;
    println!("{}", path.display());
    println!("sha256 {hash}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<ExitCode> {
    let run = &args.run;
    let loaded = load(&run.dataset)?;
    let cfg = run.cv_config();
    let meta = metadata("evaluate", &run.dataset, &loaded, cfg.seed, &cfg)?;
    let outcome = run_cv(&loaded.data, &cfg)?;
    let files = write_evaluation(&outcome, &meta, &run.out.out)?;
    println!(
        "mean oracle test accuracy {:.3}",
        outcome.mean_oracle_accuracy()
    );
    println!(
        "{:<8} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "", GED, ORACLE_CALLS, VALIDITY, SPARSITY, FIDELITY
    );
    for report in [outcome.pooled_gist(), outcome.pooled_irand()] {
        let agg = report.aggregate();
        let cell = |c: &str| format!("{:.3}±{:.3}", agg[c].mean, agg[c].std);
        println!(
            "{:<8} {:>14} {:>14} {:>14} {:>14} {:>14}",
            report.explainer,
            cell(GED),
            cell(ORACLE_CALLS),
            cell(VALIDITY),
            cell(SPARSITY),
            cell(FIDELITY)
        );
    }
    for p in files
        .fold_csvs
        .iter()
        .chain([&files.aggregate, &files.counterfactuals])
    {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<ExitCode> {
    let run = &args.run;
    let loaded = load(&run.dataset)?;
    let cfg = run.cv_config();
    #[derive(Serialize)]
    struct SweepConfig<'a> {
        alphas: &'a [f64],
        cv: &'a CvConfig,
    }
    let meta = metadata(
        "sweep-alpha",
        &run.dataset,
        &loaded,
        cfg.seed,
        &SweepConfig {
            alphas: &args.alphas,
            cv: &cfg,
        },
    )?;
    let sweep = sweep_alpha(&loaded.data, &args.alphas, &cfg)?;
    create_out(&run.out.out)?;
    let path = run.out.out.join("sweep_alpha.csv");
    write_sweep_csv(BufWriter::new(File::create(&path)?), &meta, &sweep)?;
    for r in &sweep.rows {
        println!(
            "alpha {:.2}: GED(G,G*) {:.3}  GED(G*,Ge) {:.3}  validity {:.3}",
            r.alpha, r.mean_ged_input, r.mean_ged_overshoot, r.validity
        );
    }
    println!("spearman(alpha, GED(G,G*))  = {:.3}", sweep.spearman_input);
    println!(
        "spearman(alpha, GED(G*,Ge)) = {:.3}",
        sweep.spearman_overshoot
    );
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectra(args: &SpectraArgs) -> CliResult<ExitCode> {
    let run = &args.run;
    let loaded = load(&run.dataset)?;
    let cfg = run.cv_config();
    #[derive(Serialize)]
    struct SpectraConfig<'a> {
        k_pairs: Option<usize>,
        cv: &'a CvConfig,
    }
    let meta = metadata(
        "spectra",
        &run.dataset,
        &loaded,
        cfg.seed,
        &SpectraConfig {
            k_pairs: args.k_pairs,
            cv: &cfg,
        },
    )?;
    let spectra = spectra_analysis(&loaded.data, args.k_pairs, &cfg)?;
    create_out(&run.out.out)?;
    let path = run.out.out.join("spectra.csv");
    write_spectra_csv(BufWriter::new(File::create(&path)?), &meta, &spectra)?;
    println!("pairs {}", spectra.rows.len());
    println!("mean alignment error {:.4}", spectra.mean_alignment_error);
    println!(
        "mean Frobenius relative error {:.4}",
        spectra.mean_frobenius_relative_error
    );
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<ExitCode> {
    let loaded = load(&args.dataset)?;
    #[derive(Serialize)]
    struct VerifyConfig {
        alpha: f64,
        laplacian: LaplacianKind,
    }
    let meta = metadata(
        "verify",
        &args.dataset,
        &loaded,
        args.seed,
        &VerifyConfig {
            alpha: args.alpha,
            laplacian: LaplacianKind::Combinatorial,
        },
    )?;
    let report = verify_dataset(&loaded.data, args.alpha, args.seed)?;
    create_out(&args.out.out)?;
    let json = args.out.out.join("verify.json");
    let csv = args.out.out.join("verify.csv");
    write_theorem_json(&json, &meta, &report)?;
    write_theorem_csv(BufWriter::new(File::create(&csv)?), &meta, &report)?;
    println!("pairs {}", report.pairs.len());
    println!(
        "connectivity violations  {}",
        report.connectivity_violations
    );
    println!("weyl violations          {}", report.weyl_violations);
    println!("frobenius violations     {}", report.frobenius_violations);
    println!("gap lower violations     {}", report.gap_lower_violations);
    println!("commuting violations     {}", report.commuting_violations);
    println!(
        "gap upper violations     {} (reported only)",
        report.gap_upper_violations
    );
    println!("wrote {}", json.display());
    println!("wrote {}", csv.display());
    if report.provable_ok() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: a provable property was violated");
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::SweepAlpha(a) => cmd_sweep(a),
        Command::Spectra(a) => cmd_spectra(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
