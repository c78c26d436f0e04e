//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for validation, parse and I/O errors, 2 for
//! numerical failures (solver divergence, eigendecomposition failure).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::comparison::{check_range, read_comparisons, write_comparisons, Comparison};
use crate::embedding::{
    factorize_default, read_coordinates, read_kernel_columns, write_coordinates, EmbeddingModel,
};
use crate::error::{Error, Result};
use crate::eval::{
    coordinate_distance, cross_validate_beta, filter_test_comparisons, format_report, gauc, hinge_loss,
    read_items, restrict_comparisons, write_items, SplitSpec,
};
use crate::graph::{process_with, ProcessOptions, ProcessReport};
use crate::kernel::{common_size, KernelMatrix};
use crate::oracle::oracle_embed;
use crate::solver::{train, Hyperparams, Mode, TraceLog};
use crate::synth::{
    generate_informative_kernel, generate_noise_kernel, generate_raw_comparisons, reverse_fraction, Taxonomy,
};

#[derive(Debug, Parser)]
#[command(name = "mkpoe", version, about = "Partial order embedding with multiple kernels")]
pub struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a comparison set: dedupe, prune contradictions, break cycles, reduce.
    Graph(GraphArgs),
    /// Learn per-kernel metrics and write a model file.
    Train(TrainArgs),
    /// Map items into the learned space.
    Embed(EmbedArgs),
    /// Score an embedding against comparisons (GAUC and hinge loss).
    Eval(EvalArgs),
    /// Generate a synthetic taxonomy dataset.
    Synth(SynthArgs),
    /// Exact embedding of a consistent comparison set.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Input comparisons file.
    pub input: PathBuf,
    /// Output comparisons file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Drop both members of every directly contradictory pair.
    #[arg(long)]
    pub prune_contradictions: bool,
    /// Keep a greedy maximal acyclic subset, shuffling edges with SEED.
    #[arg(long, value_name = "SEED")]
    pub max_acyclic: Option<u64>,
    /// Remove edges implied by transitivity.
    #[arg(long)]
    pub reduce: bool,
    /// Print per-stage counts.
    #[arg(long)]
    pub stats: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Kernel file; repeat for several kernels.
    #[arg(short, long = "kernel", value_name = "FILE")]
    pub kernels: Vec<PathBuf>,
    /// Train on the identity kernel over N items instead of kernel files.
    #[arg(long, value_name = "N", conflicts_with = "kernels")]
    pub identity_kernel: Option<usize>,
    #[arg(short, long)]
    pub comparisons: PathBuf,
    /// Restrict training to the items listed in this index file.
    #[arg(long, value_name = "FILE")]
    pub items: Option<PathBuf>,
    /// key=value hyperparameter file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// full or diag.
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub step0: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Choose beta by cross-validation, e.g. `0.1,1,10:5` (grid, then fold count).
    #[arg(long, value_name = "GRID:FOLDS")]
    pub cv: Option<String>,
    /// Model output file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Per-iteration trace output.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Full kernel file (one per model kernel, in training order).
    #[arg(short, long = "kernel", value_name = "FILE")]
    pub kernels: Vec<PathBuf>,
    /// Out-of-sample kernel rows: one new item per line, values against the training items.
    #[arg(long = "columns", value_name = "FILE", conflicts_with = "kernels")]
    pub columns: Vec<PathBuf>,
    /// Coordinates output file.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Coordinates file, one item per row.
    #[arg(long, conflicts_with = "model")]
    pub coords: Option<PathBuf>,
    #[arg(long, requires = "kernels")]
    pub model: Option<PathBuf>,
    #[arg(short, long = "kernel", value_name = "FILE")]
    pub kernels: Vec<PathBuf>,
    #[arg(short, long)]
    pub comparisons: PathBuf,
    /// Score only held-out query comparisons, given train and test index files.
    #[arg(long, value_name = "TRAIN,TEST")]
    pub filter_test: Option<String>,
    /// Report file; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Indented class tree; a built-in ten-class tree when absent.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    /// Jitter level of each informative kernel, comma separated.
    #[arg(long, default_value = "1.0,1.0")]
    pub kernels: String,
    /// Number of random distractor kernels.
    #[arg(long, default_value_t = 3)]
    pub noise_kernels: usize,
    /// Number of comparison draws.
    #[arg(long, default_value_t = 3000)]
    pub budget: usize,
    /// Fraction of comparisons to reverse after generation.
    #[arg(long, default_value_t = 0.0)]
    pub reverse: f64,
    /// Fraction of items held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(short, long)]
    pub comparisons: PathBuf,
    /// Number of items.
    #[arg(short, long)]
    pub n: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Parse `argv`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Graph(a) => run_graph(a),
        Command::Train(a) => run_train(a),
        Command::Embed(a) => run_embed(a),
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Oracle(a) => run_oracle(a),
    }
}

/// `key=value` stage counts.
pub fn format_process_report(r: &ProcessReport) -> String {
    format!(
        "input={}\ndeduplicated={}\nafter_contradictions={}\nafter_acyclic={}\nafter_reduction={}\n\
         removed_duplicates={}\nremoved_contradictions={}\nremoved_cycles={}\nremoved_redundant={}\n",
        r.input,
        r.deduplicated,
        r.after_contradictions,
        r.after_acyclic,
        r.after_reduction,
        r.input - r.deduplicated,
        r.deduplicated - r.after_contradictions,
        r.after_contradictions - r.after_acyclic,
        r.after_acyclic - r.after_reduction,
    )
}

fn run_graph(a: &GraphArgs) -> Result<()> {
    let comps = read_comparisons(&a.input)?;
    let opts = ProcessOptions {
        prune_contradictions: a.prune_contradictions,
        max_acyclic: a.max_acyclic,
        reduce: a.reduce,
    };
    let (out, report) = process_with(&comps, opts)?;
    write_comparisons(&a.out, &out)?;
    if a.stats {
        print!("{}", format_process_report(&report));
    }
    Ok(())
}

fn read_kernels(paths: &[PathBuf]) -> Result<Vec<KernelMatrix>> {
    let ks: Vec<KernelMatrix> = paths.iter().map(KernelMatrix::read).collect::<Result<_>>()?;
    common_size(&ks)?;
    Ok(ks)
}

fn kernel_labels(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| {
            p.file_name()
                .map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned())
        })
        .collect()
}

/// Parse `b1,b2,...:folds`.
pub fn parse_cv_spec(spec: &str) -> Result<(Vec<f64>, usize)> {
    let bad = || Error::InvalidParameter(format!("--cv expects GRID:FOLDS, got {spec:?}"));
    let (grid, folds) = spec.rsplit_once(':').ok_or_else(bad)?;
    let folds: usize = folds.trim().parse().map_err(|_| bad())?;
    let grid = grid
        .split(',')
        .map(|b| b.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<f64>>>()?;
    Ok((grid, folds))
}

fn hyperparams(a: &TrainArgs) -> Result<Hyperparams> {
    let mut hp = match &a.config {
        Some(path) => Hyperparams::default().read_config(path)?,
        None => Hyperparams::default(),
    };
    if let Some(v) = a.beta {
        hp.beta = v;
    }
    if let Some(v) = a.mode {
        hp.mode = v;
    }
    if let Some(v) = a.max_iter {
        hp.max_iter = v;
    }
    if let Some(v) = a.step0 {
        hp.step0 = v;
    }
    if let Some(v) = a.tol {
        hp.tol = v;
    }
    if let Some(v) = a.seed {
        hp.seed = v;
    }
    hp.validate()?;
    Ok(hp)
}

fn write_trace(path: Option<&PathBuf>, trace: &TraceLog) -> Result<()> {
    match path {
        Some(p) => trace.write(p),
        None => Ok(()),
    }
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let mut hp = hyperparams(a)?;
    let (kernels, labels) = match a.identity_kernel {
        Some(n) => (vec![KernelMatrix::identity(n)], vec![format!("identity:{n}")]),
        None if a.kernels.is_empty() => {
            return Err(Error::InvalidParameter("train needs --kernel or --identity-kernel".into()))
        }
        None => (read_kernels(&a.kernels)?, kernel_labels(&a.kernels)),
    };
    let n = common_size(&kernels)?;
    let comps = read_comparisons(&a.comparisons)?;
    check_range(&comps, n)?;
    let (kernels, comps, items) = match &a.items {
        Some(path) => {
            let items = read_items(path)?;
            if let Some(&bad) = items.iter().find(|&&i| i >= n) {
                return Err(Error::OutOfRange { index: bad, len: n });
            }
            let sub = kernels.iter().map(|k| k.submatrix(&items)).collect::<Result<Vec<_>>>()?;
            let local = restrict_comparisons(&comps, &items);
            (sub, local, Some(items))
        }
        None => (kernels, comps, None),
    };

    if let Some(spec) = &a.cv {
        let (grid, folds) = parse_cv_spec(spec)?;
        let report = cross_validate_beta(&kernels, &comps, &grid, folds, &hp)?;
        print!("{}", report.to_text());
        hp.beta = report.best_beta;
    }

    let (metrics, trace) = match train(&kernels, &comps, &hp) {
        Ok(r) => r,
        Err(Error::Diverged {
            iteration,
            objective,
            trace,
        }) => {
            write_trace(a.trace.as_ref(), &trace)?;
            return Err(Error::Diverged {
                iteration,
                objective,
                trace,
            });
        }
        Err(e) => return Err(e),
    };
    write_trace(a.trace.as_ref(), &trace)?;
    let mut model = factorize_default(&metrics)?;
    model.provenance.hyperparams = Some(hp);
    model.provenance.kernels = labels;
    model.provenance.items = items;
    model.save(&a.out)?;
    log::info!(
        "trained on {} comparisons: objective {} -> {} in {} iterations",
        comps.len(),
        trace.initial_objective(),
        trace.best_objective(),
        trace.entries.len()
    );
    Ok(())
}

/// Coordinates for every row of full kernel matrices. A model trained on a
/// subset maps all items through its stored training indices.
pub fn embed_with_kernels(model: &EmbeddingModel, kernels: &[KernelMatrix]) -> Result<DMatrix<f64>> {
    match &model.provenance.items {
        Some(items) => {
            let n = common_size(kernels)?;
            let all: Vec<usize> = (0..n).collect();
            let cross = kernels.iter().map(|k| k.cross(items, &all)).collect::<Result<Vec<_>>>()?;
            model.embed_columns(&cross)
        }
        None => model.embed_train(kernels),
    }
}

fn run_embed(a: &EmbedArgs) -> Result<()> {
    let model = EmbeddingModel::load(&a.model)?;
    let coords = if !a.columns.is_empty() {
        let cross = a.columns.iter().map(read_kernel_columns).collect::<Result<Vec<_>>>()?;
        model.embed_columns(&cross)?
    } else if !a.kernels.is_empty() {
        embed_with_kernels(&model, &read_kernels(&a.kernels)?)?
    } else {
        return Err(Error::InvalidParameter("embed needs --kernel or --columns".into()));
    };
    write_coordinates(&a.out, &coords)
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let coords = match (&a.coords, &a.model) {
        (Some(path), _) => read_coordinates(path)?,
        (None, Some(model)) => embed_with_kernels(&EmbeddingModel::load(model)?, &read_kernels(&a.kernels)?)?,
        (None, None) => return Err(Error::InvalidParameter("eval needs --coords or --model".into())),
    };
    let mut comps = read_comparisons(&a.comparisons)?;
    check_range(&comps, coords.nrows())?;
    if let Some(spec) = &a.filter_test {
        let (train_path, test_path) = spec
            .split_once(',')
            .ok_or_else(|| Error::InvalidParameter(format!("--filter-test expects TRAIN,TEST, got {spec:?}")))?;
        comps = filter_test_comparisons(&comps, &read_items(train_path)?, &read_items(test_path)?);
    }
    let dist = coordinate_distance(&coords);
    let report = format_report(comps.len(), gauc(&dist, &comps)?, hinge_loss(&dist, &comps)?);
    match &a.out {
        Some(path) => fs::write(path, report).map_err(|e| Error::io(path, e)),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

/// Files written by `synth`.
pub const SYNTH_COMPARISONS: &str = "comparisons.txt";
pub const SYNTH_LABELS: &str = "labels.txt";
pub const SYNTH_TRAIN: &str = "train.txt";
pub const SYNTH_TEST: &str = "test.txt";

pub fn synth_kernel_name(p: usize) -> String {
    format!("kernel-{p}.txt")
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let taxonomy = match &a.taxonomy {
        Some(p) => Taxonomy::read(p)?,
        None => Taxonomy::default_tree(),
    };
    let levels = a
        .kernels
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("--kernels: bad noise level {t:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if !(0.0..=1.0).contains(&a.reverse) {
        return Err(Error::InvalidParameter(format!("--reverse must be in [0, 1], got {}", a.reverse)));
    }
    let labels = taxonomy.items(a.per_class);
    let n = labels.len();
    let mut seeds = ChaCha8Rng::seed_from_u64(a.seed);
    let cseed = seeds.next_u64();
    let mut comps: Vec<Comparison> = if a.reverse > 0.0 {
        // reversals only create cycles when the transitive edges are still present
        generate_raw_comparisons(&taxonomy, &labels, cseed, a.budget)
    } else {
        crate::synth::generate_comparisons(&taxonomy, &labels, cseed, a.budget)
    };
    let rseed = seeds.next_u64();
    if a.reverse > 0.0 {
        comps = reverse_fraction(&comps, a.reverse, rseed).0;
    }
    let mut kernels = Vec::new();
    for &level in &levels {
        kernels.push(generate_informative_kernel(&taxonomy, &labels, level, seeds.next_u64())?);
    }
    for _ in 0..a.noise_kernels {
        kernels.push(generate_noise_kernel(n, seeds.next_u64()));
    }
    let split = SplitSpec::random(n, a.test_fraction, 2, seeds.next_u64())?;

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let dir: &Path = &a.out;
    write_comparisons(dir.join(SYNTH_COMPARISONS), &comps)?;
    for (p, k) in kernels.iter().enumerate() {
        k.write(dir.join(synth_kernel_name(p)))?;
    }
    let mut label_text = String::new();
    for (i, &l) in labels.iter().enumerate() {
        let _ = writeln!(label_text, "{i} {}", taxonomy.class_name(l));
    }
    let lpath = dir.join(SYNTH_LABELS);
    fs::write(&lpath, label_text).map_err(|e| Error::io(&lpath, e))?;
    write_items(dir.join(SYNTH_TRAIN), &split.train)?;
    write_items(dir.join(SYNTH_TEST), &split.test)?;
    log::info!("wrote {n} items, {} comparisons, {} kernels", comps.len(), kernels.len());
    Ok(())
}

fn run_oracle(a: &OracleArgs) -> Result<()> {
    let comps = read_comparisons(&a.comparisons)?;
    let coords = oracle_embed(&comps, a.n)?;
    write_coordinates(&a.out, &coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cv_spec() {
        assert_eq!(parse_cv_spec("0.1,1,10:5").unwrap(), (vec![0.1, 1.0, 10.0], 5));
        assert!(parse_cv_spec("0.1,1").is_err());
        assert!(parse_cv_spec("a:5").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["mkpoe", "bogus"]), 1);
        assert_eq!(main_with_args(["mkpoe", "--help"]), 0);
    }
}
