//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use cmab_select::bandits::{run_replay, BanditError, PolicyKind, ReplayConfig};
use cmab_select::data::{ingest_csv, save_csv, DataError};
use cmab_select::report::{write_reports_csv, write_reports_json};
use cmab_select::scoring::score_all_features_parallel;
use cmab_select::synth::generate;
use cmab_select::{
    score_all_features, BanditLog, BinConfig, CombineConfig, CsvSchema, FeatureKind, FeatureReport, GeneratorConfig,
    HieOffset,
};

use crate::args::Command;
use crate::config::merge;
use crate::harness::{run_benchmark, BenchConfig, BenchReport};
use crate::{Cli, CliError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SharedOptions {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SchemaOptions {
    pub input: Option<PathBuf>,
    pub arm_column: String,
    pub reward_column: String,
    pub arms: Option<usize>,
    pub categorical: Vec<String>,
}

impl Default for SchemaOptions {
    fn default() -> Self {
        let schema = CsvSchema::default();
        SchemaOptions {
            input: None,
            arm_column: schema.arm_column,
            reward_column: schema.reward_column,
            arms: None,
            categorical: Vec::new(),
        }
    }
}

impl SchemaOptions {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            arm_column: self.arm_column.clone(),
            reward_column: self.reward_column.clone(),
            kinds: self.categorical.iter().map(|c| (c.clone(), FeatureKind::Categorical)).collect(),
            arms: self.arms,
        }
    }

    fn load(&self) -> Result<BanditLog, CliError> {
        let input = self.input.as_deref().ok_or_else(|| CliError::usage("missing --input"))?;
        ingest_csv(input, &self.schema()).map_err(|e| match e {
            DataError::Io { .. } => CliError::runtime(e),
            other => CliError::data(format!("`{}`: {other}", input.display())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct BinOptions {
    pub bins: usize,
    pub max_categories: usize,
    pub min_arm_samples: u64,
}

impl Default for BinOptions {
    fn default() -> Self {
        let c = BinConfig::default();
        BinOptions { bins: c.bins, max_categories: c.max_categories, min_arm_samples: c.min_arm_samples }
    }
}

impl BinOptions {
    fn config(&self) -> Result<BinConfig, CliError> {
        let c =
            BinConfig { bins: self.bins, max_categories: self.max_categories, min_arm_samples: self.min_arm_samples };
        c.validate().map_err(CliError::usage)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct CombineOptions {
    pub alpha1: f64,
    pub alpha2: f64,
    pub kl_floor: f64,
    pub hie_offset: HieOffset,
}

impl Default for CombineOptions {
    fn default() -> Self {
        let c = CombineConfig::default();
        CombineOptions { alpha1: c.alpha1, alpha2: c.alpha2, kl_floor: c.kl_floor, hie_offset: c.hie_offset }
    }
}

impl CombineOptions {
    fn config(&self) -> Result<CombineConfig, CliError> {
        let c = CombineConfig {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            kl_floor: self.kl_floor,
            hie_offset: self.hie_offset,
        };
        c.validate().map_err(CliError::usage)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct GeneratorOptions {
    pub n: usize,
    pub k: usize,
    pub d_hte: usize,
    pub d_corr: usize,
    pub d_irrel: usize,
    pub effect: f64,
    pub base: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        GeneratorOptions {
            n: g.n,
            k: g.k,
            d_hte: g.d_hte,
            d_corr: g.d_corr,
            d_irrel: g.d_irrel,
            effect: g.effect,
            base: g.base,
        }
    }
}

impl GeneratorOptions {
    fn config(&self, seed: u64) -> Result<GeneratorConfig, CliError> {
        let g = GeneratorConfig {
            n: self.n,
            k: self.k,
            d_hte: self.d_hte,
            d_corr: self.d_corr,
            d_irrel: self.d_irrel,
            effect: self.effect,
            base: self.base,
            seed,
        };
        g.validate().map_err(CliError::usage)?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ScoreOptions {
    #[serde(flatten)]
    pub shared: SharedOptions,
    #[serde(flatten)]
    pub schema: SchemaOptions,
    #[serde(flatten)]
    pub bins: BinOptions,
    #[serde(flatten)]
    pub combine: CombineOptions,
    pub jobs: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            shared: SharedOptions::default(),
            schema: SchemaOptions::default(),
            bins: BinOptions::default(),
            combine: CombineOptions::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SimulateOptions {
    #[serde(flatten)]
    pub shared: SharedOptions,
    #[serde(flatten)]
    pub generator: GeneratorOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ReplayOptions {
    #[serde(flatten)]
    pub shared: SharedOptions,
    #[serde(flatten)]
    pub schema: SchemaOptions,
    #[serde(flatten)]
    pub bins: BinOptions,
    pub policy: Option<PolicyKind>,
    pub feature: Vec<String>,
    pub alpha_ucb: f64,
    pub timing: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            shared: SharedOptions::default(),
            schema: SchemaOptions::default(),
            bins: BinOptions::default(),
            policy: None,
            feature: Vec::new(),
            alpha_ucb: 1.0,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct BenchOptions {
    #[serde(flatten)]
    pub shared: SharedOptions,
    #[serde(flatten)]
    pub generator: GeneratorOptions,
    #[serde(flatten)]
    pub bins: BinOptions,
    #[serde(flatten)]
    pub combine: CombineOptions,
    pub trials: usize,
    pub policies: Vec<PolicyKind>,
    pub alpha_ucb: f64,
    pub jobs: usize,
    pub csv: Option<PathBuf>,
    pub timing: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        let b = BenchConfig::default();
        BenchOptions {
            shared: SharedOptions::default(),
            generator: GeneratorOptions::default(),
            bins: BinOptions::default(),
            combine: CombineOptions::default(),
            trials: b.trials,
            policies: b.policies,
            alpha_ucb: b.alpha_ucb,
            jobs: b.jobs,
            csv: None,
            timing: false,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot create `{}`: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::runtime(format!("writing `{}`: {e}", path.display())))
}

fn io(e: std::io::Error) -> CliError {
    CliError::runtime(format!("writing to standard output: {e}"))
}

fn check_jobs(jobs: usize) -> Result<(), CliError> {
    if jobs == 0 {
        return Err(CliError::usage("jobs must be at least 1"));
    }
    Ok(())
}

fn check_alpha_ucb(alpha: f64) -> Result<(), CliError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(CliError::usage(format!("alpha-ucb must be finite and non-negative, got {alpha}")));
    }
    Ok(())
}

/// Fixed-width table of the first `limit` reports.
pub fn format_table(reports: &[FeatureReport], limit: usize) -> String {
    let width = reports.iter().take(limit).map(|r| r.feature.len()).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:>4}  {:<width$}  {:>9}  {:>9}  {:>9}  {:>4}  flags\n",
        "rank", "feature", "combined", "hie", "hdd", "bins"
    );
    for (i, r) in reports.iter().take(limit).enumerate() {
        out += &format!(
            "{:>4}  {:<width$}  {:>9.4}  {:>9.5}  {:>9.5}  {:>4}  {}\n",
            i + 1,
            r.feature,
            r.combined,
            r.hie,
            r.hdd,
            r.bins_used,
            r.flags.join(",")
        );
    }
    out
}

pub fn run_score(opts: &ScoreOptions, stdout: &mut dyn Write) -> Result<Vec<FeatureReport>, CliError> {
    let bins = opts.bins.config()?;
    let combine = opts.combine.config()?;
    check_jobs(opts.jobs)?;
    let log = opts.schema.load()?;

    let reports = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().map_err(CliError::runtime)?;
        pool.install(|| score_all_features_parallel(&log, &bins, &combine))
    } else {
        score_all_features(&log, &bins, &combine)
    }
    .map_err(CliError::data)?;

    if let Some(path) = &opts.shared.output {
        let mut w = create(path)?;
        let written = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            write_reports_csv(&mut w, &reports).map_err(CliError::runtime)
        } else {
            write_reports_json(&mut w, &reports).map_err(CliError::runtime)
        };
        written?;
        w.flush().map_err(|e| CliError::runtime(format!("writing `{}`: {e}", path.display())))?;
    }
    write!(stdout, "{}", format_table(&reports, 10)).map_err(io)?;
    Ok(reports)
}

/// Path of the ground-truth JSON written next to a simulated CSV.
pub fn truth_path(output: &Path) -> PathBuf {
    output.with_extension("truth.json")
}

#[derive(Serialize)]
struct TruthFile<'a> {
    config: &'a GeneratorConfig,
    #[serde(flatten)]
    truth: &'a cmab_select::GroundTruth,
}

pub fn run_simulate(opts: &SimulateOptions, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = opts.generator.config(opts.shared.seed.unwrap_or(0))?;
    let output = opts.shared.output.as_deref().ok_or_else(|| CliError::usage("simulate needs --output"))?;
    let (log, truth) = generate(&config).map_err(CliError::usage)?;
    save_csv(&log, output).map_err(CliError::runtime)?;
    let sidecar = truth_path(output);
    write_json(&sidecar, &TruthFile { config: &config, truth: &truth })?;
    writeln!(
        stdout,
        "wrote {} events with {} features to {} (ground truth in {})",
        log.len(),
        log.descriptors().len(),
        output.display(),
        sidecar.display()
    )
    .map_err(io)
}

pub fn run_replay_command(opts: &ReplayOptions, stdout: &mut dyn Write) -> Result<Value, CliError> {
    let policy = opts.policy.ok_or_else(|| CliError::usage("replay needs --policy"))?;
    if opts.feature.is_empty() {
        return Err(CliError::usage("replay needs at least one --feature"));
    }
    check_alpha_ucb(opts.alpha_ucb)?;
    let bins = opts.bins.config()?;
    let log = opts.schema.load()?;

    let config = ReplayConfig {
        policy,
        features: opts.feature.clone(),
        alpha_ucb: opts.alpha_ucb,
        seed: opts.shared.seed.unwrap_or(0),
        bins,
    };
    let result = run_replay(&log, &config).map_err(|e| match e {
        BanditError::UnknownFeature(_) | BanditError::Binning(_) => CliError::data(e),
        other => CliError::runtime(other),
    })?;

    let mut value = serde_json::to_value(&result).map_err(CliError::runtime)?;
    if !opts.timing {
        value.as_object_mut().expect("object").remove("duration_secs");
    }
    if let Some(path) = &opts.shared.output {
        write_json(path, &value)?;
    }
    writeln!(
        stdout,
        "{} on [{}]: average reward {:.5} over {} matched events{}",
        result.policy,
        result.features.join(", "),
        result.average_reward,
        result.matched_count,
        if result.flags.is_empty() { String::new() } else { format!(" ({})", result.flags.join(", ")) }
    )
    .map_err(io)?;
    Ok(value)
}

pub fn bench_config(opts: &BenchOptions) -> Result<BenchConfig, CliError> {
    if opts.trials == 0 {
        return Err(CliError::usage("trials must be at least 1"));
    }
    if opts.policies.is_empty() {
        return Err(CliError::usage("policies must not be empty"));
    }
    check_jobs(opts.jobs)?;
    check_alpha_ucb(opts.alpha_ucb)?;
    Ok(BenchConfig {
        generator: opts.generator.config(opts.shared.seed.unwrap_or(0))?,
        trials: opts.trials,
        policies: opts.policies.clone(),
        bins: opts.bins.config()?,
        combine: opts.combine.config()?,
        alpha_ucb: opts.alpha_ucb,
        jobs: opts.jobs,
    })
}

/// Human-readable class means and timing table.
pub fn format_bench(report: &BenchReport) -> String {
    let mut out = String::from("class          mean_hie   mean_hdd  mean_comb");
    for p in &report.config.policies {
        out += &format!("  {:>10}", p.name());
    }
    out.push('\n');
    for c in &report.classes {
        out +=
            &format!("{:<13}  {:>8.5}  {:>9.5}  {:>9.4}", c.class.to_string(), c.mean_hie, c.mean_hdd, c.mean_combined);
        for p in &report.config.policies {
            out += &format!("  {:>10.5}", c.mean_reward[p]);
        }
        out.push('\n');
    }
    let t = &report.timing;
    out += &format!(
        "\ntiming over {} trial(s), n={}, {} features{}\n",
        t.trials,
        t.sample_size,
        t.feature_count,
        if t.concurrent { " (concurrent trials)" } else { "" }
    );
    out += &format!("  {:<10} {:>10.3} s\n", "hie+hdd", t.scoring_secs);
    for (p, secs) in &t.policy_secs {
        out += &format!("  {:<10} {:>10.3} s  {:>8.1}x\n", p.name(), secs, t.speedup[p]);
    }
    out
}

pub fn run_bench(opts: &BenchOptions, stdout: &mut dyn Write) -> Result<BenchReport, CliError> {
    let config = bench_config(opts)?;
    let report = run_benchmark(&config).map_err(|e| CliError::runtime(format!("{e:#}")))?;
    if let Some(path) = &opts.shared.output {
        let value = if opts.timing {
            serde_json::to_value(&report).map_err(CliError::runtime)?
        } else {
            report.deterministic_json()
        };
        write_json(path, &value)?;
    }
    let csv_path = opts.csv.clone().or_else(|| opts.shared.output.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = csv_path {
        let mut w = create(&path)?;
        report.write_csv(&mut w).map_err(CliError::runtime)?;
    }
    write!(stdout, "{}", format_bench(&report)).map_err(io)?;
    Ok(report)
}

/// Runs the parsed command line, writing human-readable output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Score(args) => {
            let opts: ScoreOptions = merge(args.shared.config.as_deref(), &args)?;
            run_score(&opts, stdout).map(drop)
        }
        Command::Simulate(args) => {
            let opts: SimulateOptions = merge(args.shared.config.as_deref(), &args)?;
            run_simulate(&opts, stdout)
        }
        Command::Replay(args) => {
            let opts: ReplayOptions = merge(args.shared.config.as_deref(), &args)?;
            run_replay_command(&opts, stdout).map(drop)
        }
        Command::Bench(args) => {
            let opts: BenchOptions = merge(args.shared.config.as_deref(), &args)?;
            run_bench(&opts, stdout).map(drop)
        }
    }
}
