use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use modopt_core::data::{generate_synthetic_dataset, load_market_dir, write_market_dir, DataFiles, SynthConfig};
use modopt_core::eval::compare_models;
use modopt_core::nn::TrainConfig;
use modopt_core::features::{chronological_split, engineer_dataset, load_features_csv, write_features_csv, FeatureRow, Split};
use modopt_core::pricing::{baw_call_price, bs_call_price, crr_binomial_call, tau_from_dte, ExerciseStyle, PricingInputs};
use modopt_core::tuning::{run_search, write_trial_log, SearchConfig, Strategy};
use modopt_core::zoo::{train_model, Arch, ModelSpec, ScaledSplit, TrainedModel};
use serde::Serialize;

use crate::config::{DataSource, RunConfig};
use crate::{CliError, PriceArgs, PricerModel};

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn price(args: &PriceArgs) -> Result<()> {
    let inp = PricingInputs {
        spot: args.spot,
        strike: args.strike,
        rate: args.rate,
        div_yield: args.div_yield,
        vol: args.vol,
        tau: tau_from_dte(args.dte),
    };
    inp.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.steps == 0 {
        return Err(CliError::Usage("--steps must be >= 1".into()));
    }
    let value = match args.model {
        PricerModel::Bs => bs_call_price(&inp),
        PricerModel::Baw => baw_call_price(&inp),
        PricerModel::Bop => crr_binomial_call(&inp, args.steps, ExerciseStyle::American),
    }
    .context("pricing failed")?;
    println!("{value:.6}");
    Ok(())
}

#[derive(Serialize)]
struct RowCounts {
    chain: usize,
    #[serde(rename = "macro")]
    macro_series: usize,
    dividends: usize,
    rates: usize,
    underlying: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    generated_at: String,
    rows: RowCounts,
    config: &'a SynthConfig,
}

pub fn generate(cfg: &RunConfig, seed: u64, out_dir: &Path) -> Result<()> {
    let synth = cfg.data.synthetic.clone().unwrap_or_default();
    let ds = generate_synthetic_dataset(&synth, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    create_dir(out_dir)?;
    let files = DataFiles::in_dir(out_dir);
    let [chain, macro_series, dividends, rates, underlying] =
        write_market_dir(&files, &ds.quotes, &ds.market).context("writing generated data")?;
    let manifest = Manifest {
        seed,
        generated_at: chrono::Utc::now().to_rfc3339(),
        rows: RowCounts {
            chain,
            macro_series,
            dividends,
            rates,
            underlying,
        },
        config: &synth,
    };
    let json = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
    write_file(&out_dir.join("manifest.json"), &(json + "\n"))?;
    println!("wrote {chain} quotes and market series to {}", out_dir.display());
    Ok(())
}

/// Feature rows from whichever source the config names.
fn load_rows(cfg: &RunConfig, seed: Option<u64>) -> Result<(Vec<FeatureRow>, String)> {
    let src = cfg.data_source()?;
    let label = src.label();
    let rows = match src {
        DataSource::Features(p) => load_features_csv(&p).with_context(|| format!("loading {}", p.display()))?,
        DataSource::Files(files) => {
            let (chain, market) = load_market_dir(&files).context("loading market data")?;
            if chain.dropped > 0 {
                warn!("{} chain rows dropped during loading", chain.dropped);
            }
            let set = engineer_dataset(&chain.quotes, &market).context("engineering features")?;
            if set.skipped > 0 {
                warn!("{} quotes skipped during feature engineering", set.skipped);
            }
            set.rows
        }
        DataSource::Synthetic(s) => {
            let seed = cfg.seed(seed)?;
            let ds = generate_synthetic_dataset(&s, seed).map_err(|e| CliError::Usage(e.to_string()))?;
            engineer_dataset(&ds.quotes, &ds.market).context("engineering features")?.rows
        }
    };
    info!("{} feature rows from {label}", rows.len());
    Ok((rows, label))
}

fn split_rows(cfg: &RunConfig, rows: Vec<FeatureRow>) -> Result<Split> {
    let split = chronological_split(rows, cfg.split.train_frac, cfg.split.val_frac_of_train)
        .context("splitting rows")?;
    info!(
        "split: {} train, {} val, {} test rows",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(split)
}

pub fn features(cfg: &RunConfig, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let (rows, _) = load_rows(cfg, seed)?;
    create_dir(out_dir)?;
    let path = out_dir.join("features.csv");
    write_features_csv(&path, &rows).context("writing features")?;
    println!("wrote {} feature rows to {}", rows.len(), path.display());
    Ok(())
}

fn read_spec(path: &Path, arch: Arch) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read spec {}: {e}", path.display())))?;
    let spec: ModelSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid spec {}: {e}", path.display())))?;
    if spec.arch() != arch {
        return Err(CliError::Usage(format!(
            "spec {} is for {}, not {}",
            path.display(),
            spec.arch().name(),
            arch.name()
        )));
    }
    Ok(spec)
}

pub fn train(cfg: &RunConfig, arch: Arch, spec_path: Option<&Path>, seed: u64, out_dir: &Path) -> Result<()> {
    let spec = match spec_path {
        Some(p) => read_spec(p, arch)?,
        None => ModelSpec::paper_best(arch),
    };
    let train_cfg = train_config(cfg, seed);
    train_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (rows, _) = load_rows(cfg, Some(seed))?;
    let split = split_rows(cfg, rows)?;
    let data = ScaledSplit::new(&split, &spec.input_columns()).context("scaling features")?;
    let (model, history) = train_model(&spec, &data, &train_cfg).context("training failed")?;
    create_dir(out_dir)?;
    let model_path = out_dir.join(format!("{}_model.json", arch.name()));
    let history_path = out_dir.join(format!("{}_history.csv", arch.name()));
    model.save(&model_path).context("saving model")?;
    write_file(&history_path, &history.to_csv())?;
    println!(
        "{}: {} parameters, {} epochs, best val MSE {:.6e} at epoch {}",
        arch.name(),
        model.network.param_count(),
        history.epochs(),
        history.best_val_mse(),
        history.best_epoch + 1
    );
    println!("model: {}", model_path.display());
    println!("history: {}", history_path.display());
    Ok(())
}

fn train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.train }
}

pub struct TuneArgs {
    pub arch: Arch,
    pub budget: Option<u64>,
    pub strategy: Option<Strategy>,
    pub workers: Option<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn tune(cfg: &RunConfig, args: &TuneArgs) -> Result<()> {
    let space = cfg.search.space.clone();
    space.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let search = SearchConfig {
        arch: args.arch,
        budget: args.budget.or(cfg.search.budget).unwrap_or(20),
        strategy: args.strategy.or(cfg.search.strategy).unwrap_or(Strategy::Random),
        seed: args.seed,
        train: train_config(cfg, args.seed),
        workers: args.workers.or(cfg.search.workers),
    };
    if search.budget == 0 {
        return Err(CliError::Usage("--budget must be >= 1".into()));
    }
    let size = space.size(search.arch);
    if search.strategy == Strategy::Grid && search.budget > size {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "budget {} exceeds the {size} configurations in the grid",
            search.budget
        )));
    }
    search.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (rows, _) = load_rows(cfg, Some(args.seed))?;
    let split = split_rows(cfg, rows)?;
    let data = ScaledSplit::new(&split, &ModelSpec::paper_best(args.arch).input_columns()).context("scaling features")?;
    let ranked = run_search(&space, &search, &data.train, &data.val).context("search failed")?;
    create_dir(&args.out_dir)?;
    let log_path = args.out_dir.join(format!("{}_trials.csv", args.arch.name()));
    let spec_path = args.out_dir.join(format!("{}_best_spec.json", args.arch.name()));
    write_trial_log(&log_path, &ranked).context("writing trial log")?;
    let best = &ranked[0];
    let json = serde_json::to_string_pretty(&best.spec).context("serializing spec")?;
    write_file(&spec_path, &(json + "\n"))?;
    println!(
        "{} trials; best is trial {} with val MSE {:.6e} ({} parameters)",
        ranked.len(),
        best.trial_index,
        best.val_mse,
        best.param_count
    );
    println!("trial log: {}", log_path.display());
    println!("best spec: {}", spec_path.display());
    Ok(())
}

fn load_model(path: &Path, arch: Arch) -> Result<TrainedModel> {
    if !path.exists() {
        return Err(CliError::Usage(format!("model file does not exist: {}", path.display())));
    }
    let model = TrainedModel::load(path).with_context(|| format!("loading {}", path.display()))?;
    if model.spec.arch() != arch {
        return Err(CliError::Usage(format!(
            "{} holds a {} model, expected {}",
            path.display(),
            model.spec.arch().name(),
            arch.name()
        )));
    }
    Ok(model)
}

pub fn evaluate(
    cfg: &RunConfig,
    mnn_path: &Path,
    fnn_path: &Path,
    seed: Option<u64>,
    dataset: Option<&str>,
    out_dir: &Path,
) -> Result<()> {
    let mnn = load_model(mnn_path, Arch::Mnn)?;
    let fnn = load_model(fnn_path, Arch::Fnn)?;
    let (rows, label) = load_rows(cfg, seed)?;
    let split = split_rows(cfg, rows)?;
    let report = compare_models(dataset.unwrap_or(&label), &split.test, &mnn, &fnn).context("evaluation failed")?;
    create_dir(out_dir)?;
    let path = out_dir.join("eval_report.json");
    write_file(&path, &(report.to_json() + "\n"))?;
    print!("{}", report.table());
    println!("report: {}", path.display());
    Ok(())
}
