//! Command-line front end.
//!
//! Settings resolve as flags over an optional `--config` JSON file over
//! built-in defaults. The effective settings are echoed into every metadata
//! file the run writes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{
    ablation_curve, behavioral_outliers, cc_summary, contribution_value, data_shapley_values,
    decomposition_accuracy, force_segments, normalize_contribution, AblationRow, CcSummary, Direction, OutlierMode,
    ValueKind,
};
use crate::dataio::{load_csv_with, make_split, Dataset, SplitPlan};
use crate::engine::{decompose_exact_with, decompose_monte_carlo, default_threads, run_in_pool, ExactConfig, McConfig};
use crate::error::Error;
use crate::influence::{decompose_all_s, decompose_largest_s, InfluenceConfig};
use crate::kernel::decompose_kernel;
use crate::models::{ModelKind, ModelSpec};
use crate::phi::PhiMatrix;
use crate::plot::{force_svg, line_svg, scatter_svg};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    /// 1 generic failure, 2 usage or incompatible options, 3 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(Error::Incompatible(_) | Error::InvalidInput(_)) => 2,
            CliError::Run(Error::Io { .. }) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(Error::Json(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Ridge,
    Forest,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Exact,
    Mc,
    Kernel,
    InfluenceAll,
    InfluenceLargest,
}

impl EstimatorName {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorName::Exact => "exact",
            EstimatorName::Mc => "mc",
            EstimatorName::Kernel => "kernel",
            EstimatorName::InfluenceAll => "influence-all",
            EstimatorName::InfluenceLargest => "influence-largest",
        }
    }
}

/// Resolved run settings. Missing keys in a config file take these defaults.
/// The thread count and output directory are accepted but not echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub target: Option<String>,
    pub id_column: String,
    pub model: ModelName,
    pub lambda: f64,
    pub intercept: bool,
    pub trees: usize,
    pub min_leaf: usize,
    pub feature_fraction: f64,
    pub constant: f64,
    pub estimator: EstimatorName,
    /// `None` means the symmetric split.
    pub test_fraction: Option<f64>,
    pub seed: u64,
    /// 0 uses every core.
    #[serde(skip_serializing)]
    pub threads: usize,
    pub max_permutations: Option<usize>,
    pub truncation_tol: Option<f64>,
    pub convergence_tol: f64,
    pub convergence_window: usize,
    /// Kernel coalition budget; defaults to `2N + 2048`.
    pub budget: Option<usize>,
    pub subset_samples: Option<usize>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub plots: bool,
    pub standardize: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            input: None,
            target: None,
            id_column: "id".into(),
            model: ModelName::Ridge,
            lambda: 1.0,
            intercept: true,
            trees: 100,
            min_leaf: 1,
            feature_fraction: 1.0 / 3.0,
            constant: 0.0,
            estimator: EstimatorName::Mc,
            test_fraction: None,
            seed: 0,
            threads: 0,
            max_permutations: None,
            truncation_tol: None,
            convergence_tol: 0.01,
            convergence_window: 100,
            budget: None,
            subset_samples: None,
            out: PathBuf::from("out"),
            plots: false,
            standardize: false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "resdecomp", version, about = "Decompose regression residuals into per-training-instance contributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the decomposition matrix.
    Decompose(DecomposeArgs),
    /// Contribution/composition summaries and scatter plots.
    Cc(CcArgs),
    /// Force-plot data for one test instance.
    Force(ForceArgs),
    /// Isolation-forest outliers in behavior and feature space.
    Outliers(OutliersArgs),
    /// Test error as training instances are removed by rank.
    Ablate(AblateArgs),
    /// Run several estimators on the same problem and tabulate accuracy and time.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file of settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub id_column: Option<String>,
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fit ridge without an intercept.
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub feature_fraction: Option<f64>,
    /// Prediction of the constant model.
    #[arg(long, allow_hyphen_values = true)]
    pub constant: Option<f64>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorName>,
    /// Train and evaluate on the same instances.
    #[arg(long, conflicts_with = "test_fraction")]
    pub symmetric: bool,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub max_permutations: Option<usize>,
    /// 0 disables truncation.
    #[arg(long)]
    pub truncation_tol: Option<f64>,
    #[arg(long)]
    pub convergence_tol: Option<f64>,
    #[arg(long)]
    pub convergence_window: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub subset_samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plots: bool,
    /// z-score features using the training rows.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CcArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Decomposition CSV to summarize; computed afresh when omitted.
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Also plot the variance axes.
    #[arg(long)]
    pub variance: bool,
}

#[derive(Debug, Args)]
pub struct ForceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Test instance id.
    #[arg(long)]
    pub instance: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Behavior,
    Features,
    Both,
}

#[derive(Debug, Args)]
pub struct OutliersArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    pub contamination: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankingSource {
    Contribution,
    Datashapley,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    RemoveHigh,
    RemoveLow,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ValueKindArg {
    MeanSq,
    SqMean,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "contribution")]
    pub ranking: RankingSource,
    #[arg(long, value_enum, default_value = "remove-high")]
    pub direction: DirectionArg,
    /// Instances to remove; defaults to a tenth of the training set.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Random orders averaged for the random curve.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value = "mean-sq")]
    pub value_kind: ValueKindArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "mc,kernel,influence-all,influence-largest"
    )]
    pub estimators: Vec<EstimatorName>,
}

/// Applies a config file and then flags on top of the defaults.
pub fn resolve_settings(common: &CommonArgs) -> CliResult<Settings> {
    let mut s = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    macro_rules! overlay {
        ($($field:ident),*) => {$(
            if let Some(v) = &common.$field {
                s.$field = v.clone();
            }
        )*};
    }
    overlay!(id_column, model, lambda, trees, min_leaf, feature_fraction, constant, estimator, seed, threads, convergence_tol, convergence_window, out);
    if common.input.is_some() {
        s.input = common.input.clone();
    }
    if common.target.is_some() {
        s.target = common.target.clone();
    }
    for (flag, slot) in [
        (common.max_permutations, &mut s.max_permutations),
        (common.budget, &mut s.budget),
        (common.subset_samples, &mut s.subset_samples),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if common.truncation_tol.is_some() {
        s.truncation_tol = common.truncation_tol;
    }
    if common.symmetric {
        s.test_fraction = None;
    }
    if common.test_fraction.is_some() {
        s.test_fraction = common.test_fraction;
    }
    s.intercept &= !common.no_intercept;
    s.plots |= common.plots;
    s.standardize |= common.standardize;
    Ok(s)
}

impl Settings {
    pub fn model_spec(&self) -> ModelSpec {
        let kind = match self.model {
            ModelName::Ridge => ModelKind::Ridge {
                lambda: self.lambda,
                intercept: self.intercept,
            },
            ModelName::Forest => ModelKind::Forest {
                trees: self.trees,
                min_leaf: self.min_leaf,
                feature_fraction: self.feature_fraction,
            },
            ModelName::Constant => ModelKind::Constant { value: self.constant },
        };
        ModelSpec {
            kind,
            fit_seed: derive_seed(self.seed, "model"),
        }
    }

    fn effective_threads(&self) -> usize {
        if self.threads == 0 {
            default_threads()
        } else {
            self.threads
        }
    }

    fn mc_config(&self) -> McConfig {
        McConfig {
            max_permutations: self.max_permutations,
            convergence_tol: self.convergence_tol,
            convergence_window: self.convergence_window,
            truncation_tol: self.truncation_tol,
            seed: self.seed,
            threads: self.effective_threads(),
            ..McConfig::default()
        }
    }
}

/// Loaded data and settings shared by every subcommand.
pub struct Context {
    pub settings: Settings,
    pub ds: Dataset,
    pub split: SplitPlan,
    pub spec: ModelSpec,
    echo: Value,
}

impl Context {
    fn load(common: &CommonArgs, command: &str, extra: Value) -> CliResult<Self> {
        let settings = resolve_settings(common)?;
        let input = settings
            .input
            .clone()
            .ok_or_else(|| CliError::Usage("--input is required".into()))?;
        let target = settings
            .target
            .clone()
            .ok_or_else(|| CliError::Usage("--target is required".into()))?;
        let spec = settings.model_spec();
        spec.validate()?;
        let ds = load_csv_with(&input, &target, &settings.id_column)?;
        let split = match settings.test_fraction {
            Some(f) => make_split(ds.n(), f, derive_seed(settings.seed, "split"), false)?,
            None => SplitPlan::symmetric(ds.n()),
        };
        let ds = if settings.standardize {
            ds.standardized(split.train())?
        } else {
            ds
        };
        let mut echo = serde_json::to_value(&settings)?;
        echo["command"] = json!(command);
        if let (Value::Object(map), Value::Object(more)) = (&mut echo, extra) {
            map.extend(more);
        }
        fs::create_dir_all(&settings.out).map_err(|e| Error::Io {
            path: settings.out.clone(),
            source: e,
        })?;
        Ok(Self {
            settings,
            ds,
            split,
            spec,
            echo,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.settings.out.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out(name);
        fs::write(&path, contents).map_err(|e| Error::Io { path, source: e })?;
        Ok(())
    }

    fn write_echo(&self, name: &str) -> CliResult<()> {
        self.write(name, &(serde_json::to_string_pretty(&self.echo)? + "\n"))
    }

    /// Runs one estimator with the context's settings.
    pub fn decompose(&self, estimator: EstimatorName) -> CliResult<PhiMatrix> {
        let s = &self.settings;
        let threads = s.effective_threads();
        let mut phi = match estimator {
            EstimatorName::Exact => decompose_exact_with(
                &self.spec,
                &self.ds,
                &self.split,
                &ExactConfig {
                    threads,
                    ..ExactConfig::default()
                },
            )?,
            EstimatorName::Mc => decompose_monte_carlo(&self.spec, &self.ds, &self.split, &s.mc_config())?,
            EstimatorName::Kernel => {
                let budget = s.budget.unwrap_or(2 * self.split.train().len() + 2048);
                decompose_kernel(&self.spec, &self.ds, &self.split, budget, s.seed, threads)?
            }
            EstimatorName::InfluenceAll => decompose_all_s(
                &self.spec,
                &self.ds,
                &self.split,
                &InfluenceConfig {
                    subset_samples: s.subset_samples,
                    seed: s.seed,
                    threads,
                    exact_singletons: true,
                },
            )?,
            EstimatorName::InfluenceLargest => decompose_largest_s(&self.spec, &self.ds, &self.split)?,
        };
        let mut echo = self.echo.clone();
        echo["estimator"] = json!(estimator.as_str());
        phi.meta.config = echo;
        phi.meta.seed = s.seed;
        Ok(phi)
    }

    /// Reads `--phi` when given, otherwise computes and saves a fresh matrix.
    fn phi(&self, path: Option<&Path>) -> CliResult<PhiMatrix> {
        match path {
            Some(p) => Ok(PhiMatrix::read(p)?),
            None => {
                let phi = self.decompose(self.settings.estimator)?;
                phi.write(&self.settings.out, "phi")?;
                Ok(phi)
            }
        }
    }
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cc_csv(rows: &[CcSummary]) -> String {
    let mut out = String::from(CcSummary::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// `(file name, svg)` scatter plots of a CC summary.
fn cc_plots(rows: &[CcSummary], title: &str, variance: bool) -> Vec<(String, String)> {
    let both: Vec<&CcSummary> = rows
        .iter()
        .filter(|r| r.contribution.is_some() && r.composition.is_some())
        .collect();
    let mut out = Vec::new();
    if !both.is_empty() {
        let colors: Vec<f64> = both.iter().map(|r| r.target).collect();
        let means: Vec<(f64, f64)> = both
            .iter()
            .map(|r| (r.contribution.unwrap().mean, r.composition.unwrap().mean))
            .collect();
        out.push((
            "cc_mean.svg".to_string(),
            scatter_svg(&means, &colors, title, "contribution mean", "composition mean"),
        ));
        if variance {
            let vars: Vec<(f64, f64)> = both
                .iter()
                .map(|r| (r.contribution.unwrap().var, r.composition.unwrap().var))
                .collect();
            out.push((
                "cc_variance.svg".to_string(),
                scatter_svg(&vars, &colors, title, "contribution var", "composition var"),
            ));
        }
        return out;
    }
    for (name, pick, label) in [
        ("cc_contribution.svg", 0, "contribution"),
        ("cc_composition.svg", 1, "composition"),
    ] {
        let sel: Vec<(&CcSummary, crate::analysis::Stats)> = rows
            .iter()
            .filter_map(|r| if pick == 0 { r.contribution } else { r.composition }.map(|s| (r, s)))
            .collect();
        let pts: Vec<(f64, f64)> = sel.iter().map(|(_, s)| (s.mean, s.var)).collect();
        let colors: Vec<f64> = sel.iter().map(|(r, _)| r.target).collect();
        out.push((
            name.to_string(),
            scatter_svg(&pts, &colors, title, &format!("{label} mean"), &format!("{label} var")),
        ));
    }
    out
}

fn cmd_decompose(args: &DecomposeArgs) -> CliResult<()> {
    let ctx = Context::load(&args.common, "decompose", json!({}))?;
    let phi = ctx.decompose(ctx.settings.estimator)?;
    phi.write(&ctx.settings.out, "phi")?;
    Ok(())
}

fn cmd_cc(args: &CcArgs) -> CliResult<()> {
    let ctx = Context::load(&args.common, "cc", json!({ "phi": args.phi, "variance": args.variance }))?;
    let phi = ctx.phi(args.phi.as_deref())?;
    let rows = cc_summary(&phi, &normalize_contribution(&phi), &ctx.ds)?;
    ctx.write("cc_summary.csv", &cc_csv(&rows))?;
    if ctx.settings.plots || args.variance {
        for (name, svg) in cc_plots(&rows, &format!("CC plot ({})", phi.meta.estimator), args.variance) {
            ctx.write(&name, &svg)?;
        }
    }
    ctx.write_echo("cc.config.json")
}

fn cmd_force(args: &ForceArgs) -> CliResult<()> {
    let ctx = Context::load(&args.common, "force", json!({ "phi": args.phi, "instance": args.instance }))?;
    let phi = ctx.phi(args.phi.as_deref())?;
    let force = force_segments(&phi, &ctx.ds, &args.instance)?;
    let stem = format!("force_{}", safe_name(&args.instance));
    ctx.write(&format!("{stem}.json"), &(serde_json::to_string_pretty(&force)? + "\n"))?;
    ctx.write(&format!("{stem}.svg"), &force_svg(&force))?;
    ctx.write_echo("force.config.json")
}

fn cmd_outliers(args: &OutliersArgs) -> CliResult<()> {
    let mode = match args.mode {
        ModeArg::Behavior => OutlierMode::Behavior,
        ModeArg::Features => OutlierMode::Features,
        ModeArg::Both => OutlierMode::Both,
    };
    let ctx = Context::load(
        &args.common,
        "outliers",
        json!({ "phi": args.phi, "mode": mode, "contamination": args.contamination }),
    )?;
    let phi = ctx.phi(args.phi.as_deref())?;
    let c = normalize_contribution(&phi);
    let report = behavioral_outliers(&c, &ctx.ds, mode, args.contamination, derive_seed(ctx.settings.seed, "outliers"))?;
    let score = |name: &str, id: &str| -> String {
        let k = c.train_ids.iter().position(|x| x == id);
        let scores = match name {
            "behavior" => report.behavior_scores.as_ref(),
            "features" => report.feature_scores.as_ref(),
            _ => None,
        };
        match (k, scores) {
            (Some(k), Some(s)) => s[k].to_string(),
            _ => String::new(),
        }
    };
    let mut out = String::from("mode,id,score\n");
    for (name, id) in report.flagged() {
        out.push_str(&format!("{name},{id},{}\n", score(name, id)));
    }
    ctx.write("outliers.csv", &out)?;
    ctx.write_echo("outliers.config.json")
}

fn cmd_ablate(args: &AblateArgs) -> CliResult<()> {
    let kind = match args.value_kind {
        ValueKindArg::MeanSq => ValueKind::MeanSq,
        ValueKindArg::SqMean => ValueKind::SqMean,
    };
    let direction = match args.direction {
        DirectionArg::RemoveHigh => Direction::RemoveHigh,
        DirectionArg::RemoveLow => Direction::RemoveLow,
    };
    let ranking_name = match args.ranking {
        RankingSource::Contribution => "contribution",
        RankingSource::Datashapley => "datashapley",
        RankingSource::Random => "random",
    };
    let ctx = Context::load(
        &args.common,
        "ablate",
        json!({
            "phi": args.phi,
            "ranking": ranking_name,
            "direction": direction,
            "steps": args.steps,
            "repeats": args.repeats,
            "value_kind": kind,
        }),
    )?;
    let train = ctx.split.train();
    let steps = args.steps.unwrap_or((train.len() / 10).max(1));
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..args.repeats)
        .map(|k| derive_seed(ctx.settings.seed, &format!("ablation_{k}")))
        .collect();
    let threads = ctx.settings.effective_threads();
    let ranking: Option<Vec<f64>> = match args.ranking {
        RankingSource::Contribution => {
            let phi = ctx.phi(args.phi.as_deref())?;
            let values = contribution_value(&normalize_contribution(&phi), kind);
            let by_id: std::collections::HashMap<&str, f64> =
                phi.train_ids.iter().map(String::as_str).zip(values).collect();
            Some(
                train
                    .iter()
                    .map(|&r| {
                        by_id
                            .get(ctx.ds.id(r))
                            .copied()
                            .ok_or_else(|| Error::UnknownId(ctx.ds.id(r).to_string()))
                    })
                    .collect::<Result<_, _>>()?,
            )
        }
        RankingSource::Datashapley => {
            let dsv = data_shapley_values(&ctx.spec, &ctx.ds, &ctx.split, &ctx.settings.mc_config())?;
            let mut text = String::from("id,data_shapley\n");
            for (&r, v) in train.iter().zip(&dsv.values) {
                text.push_str(&format!("{},{v}\n", ctx.ds.id(r)));
            }
            ctx.write("data_shapley.csv", &text)?;
            // Low Data Shapley value means harmful, so remove those first.
            Some(dsv.values.iter().map(|v| -v).collect())
        }
        RankingSource::Random => None,
    };
    let mut table = String::from(AblationRow::CSV_HEADER);
    table.push('\n');
    let mut series = Vec::new();
    let random = run_in_pool(threads, || {
        ablation_curve(&ctx.spec, &ctx.ds, &ctx.split, &[], Direction::Random, steps, &seeds)
    })??;
    if let Some(r) = &ranking {
        let rows = run_in_pool(threads, || ablation_curve(&ctx.spec, &ctx.ds, &ctx.split, r, direction, steps, &[]))??;
        for row in &rows {
            table.push_str(&row.csv_row(direction, ranking_name));
            table.push('\n');
        }
        series.push((
            format!("{ranking_name} {}", direction.as_str()),
            rows.iter().map(|r| (r.removed as f64, r.mse)).collect(),
        ));
    }
    for row in &random {
        table.push_str(&row.csv_row(Direction::Random, "random"));
        table.push('\n');
    }
    series.push((
        format!("random (mean of {})", seeds.len()),
        random.iter().map(|r| (r.removed as f64, r.mse)).collect(),
    ));
    ctx.write("ablation.csv", &table)?;
    if ctx.settings.plots {
        ctx.write("ablation.svg", &line_svg(&series, "ablation", "instances removed", "test MSE"))?;
    }
    ctx.write_echo("ablate.config.json")
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn cmd_compare(args: &CompareArgs) -> CliResult<()> {
    if args.estimators.len() < 2 {
        return Err(CliError::Usage("compare needs at least two estimators".into()));
    }
    let names: Vec<&str> = args.estimators.iter().map(|e| e.as_str()).collect();
    let ctx = Context::load(&args.common, "compare", json!({ "estimators": names }))?;
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for &est in &args.estimators {
        match ctx.decompose(est) {
            Ok(phi) => {
                let stem = format!("phi_{}", est.as_str());
                phi.write(&ctx.settings.out, &stem)?;
                let rows = cc_summary(&phi, &normalize_contribution(&phi), &ctx.ds)?;
                for (name, svg) in cc_plots(&rows, &format!("CC plot ({})", est.as_str()), false) {
                    ctx.write(&format!("{}_{name}", est.as_str()), &svg)?;
                }
                let acc = decomposition_accuracy(&phi);
                ok.push((phi.meta.wall_time_seconds, est.as_str(), acc.mean, acc.max));
            }
            Err(e) => failed.push((est.as_str(), csv_field(&e.to_string()))),
        }
    }
    ok.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    let mut table = String::from("estimator,status,wall_time_seconds,mean_error,max_error\n");
    for (t, name, mean, max) in ok {
        table.push_str(&format!("{name},ok,{t},{mean},{max}\n"));
    }
    for (name, msg) in failed {
        table.push_str(&format!("{name},{msg},,,\n"));
    }
    ctx.write("compare.csv", &table)?;
    ctx.write_echo("compare.config.json")
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Cc(a) => cmd_cc(a),
        Command::Force(a) => cmd_force(a),
        Command::Outliers(a) => cmd_outliers(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Errors are printed to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("resdecomp").chain(args.iter().copied())).unwrap()
    }

    fn common(cli: &Cli) -> &CommonArgs {
        match &cli.command {
            Command::Decompose(a) => &a.common,
            _ => panic!("expected decompose"),
        }
    }

    #[test]
    fn flags_override_config_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"lambda": 3.0, "seed": 5, "model": "forest", "test_fraction": 0.25}"#).unwrap();
        let cli = parse(&["decompose", "--config", cfg.to_str().unwrap(), "--seed", "9", "--symmetric"]);
        let s = resolve_settings(common(&cli)).unwrap();
        assert_eq!(s.lambda, 3.0);
        assert_eq!(s.seed, 9);
        assert_eq!(s.model, ModelName::Forest);
        assert_eq!(s.test_fraction, None);
        assert_eq!(s.convergence_tol, 0.01);
    }

    #[test]
    fn unknown_config_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"lamda": 3.0}"#).unwrap();
        let cli = parse(&["decompose", "--config", cfg.to_str().unwrap()]);
        assert_eq!(resolve_settings(common(&cli)).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn symmetric_conflicts_with_test_fraction() {
        assert!(Cli::try_parse_from(["resdecomp", "decompose", "--symmetric", "--test-fraction", "0.2"]).is_err());
    }

    #[test]
    fn estimator_names_are_kebab_case() {
        let cli = parse(&["decompose", "--estimator", "influence-all"]);
        assert_eq!(common(&cli).estimator, Some(EstimatorName::InfluenceAll));
        let json = serde_json::to_string(&EstimatorName::InfluenceLargest).unwrap();
        assert_eq!(json, "\"influence-largest\"");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Run(Error::Incompatible("x".into())).exit_code(), 2);
        assert_eq!(
            CliError::Run(Error::Io {
                path: "p".into(),
                source: std::io::Error::other("x")
            })
            .exit_code(),
            3
        );
        assert_eq!(CliError::Run(Error::Singular("x".into())).exit_code(), 1);
        assert_eq!(main_with_args(["resdecomp", "bogus"]), 2);
    }

    #[test]
    fn safe_file_names() {
        assert_eq!(safe_name("a/b c"), "a_b_c");
    }
}
