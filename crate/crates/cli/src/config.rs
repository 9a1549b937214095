use std::path::{Path, PathBuf};

use modopt_core::data::{DataFiles, SynthConfig};
use modopt_core::features::{DEFAULT_TRAIN_FRAC, DEFAULT_VAL_FRAC_OF_TRAIN};
use modopt_core::nn::TrainConfig;
use modopt_core::tuning::{SearchSpace, Strategy};
use serde::Deserialize;

use crate::CliError;

/// Where the rows come from. Exactly one source must be set.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding chain.csv, macro.csv, dividends.csv, rates.csv and
    /// underlying.csv.
    pub dir: Option<PathBuf>,
    /// Explicit paths to the five raw files.
    pub files: Option<DataFiles>,
    /// Generate in memory from these settings and the run seed.
    pub synthetic: Option<SynthConfig>,
    /// A previously written feature CSV.
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Files(DataFiles),
    Synthetic(SynthConfig),
    Features(PathBuf),
}

impl DataSource {
    /// Short name used as the report's dataset id.
    pub fn label(&self) -> String {
        match self {
            DataSource::Files(f) => f
                .chain
                .parent()
                .and_then(Path::file_name)
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into()),
            DataSource::Synthetic(_) => "synthetic".into(),
            DataSource::Features(p) => p
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "features".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub val_frac_of_train: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_frac: DEFAULT_TRAIN_FRAC,
            val_frac_of_train: DEFAULT_VAL_FRAC_OF_TRAIN,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default)]
    pub space: SearchSpace,
    pub budget: Option<u64>,
    pub strategy: Option<Strategy>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    /// Training settings; the run seed replaces `train.seed`.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub search: SearchSection,
    pub output_dir: Option<PathBuf>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    base: PathBuf,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// The flag wins over the config; one of them is required.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed)
            .ok_or_else(|| CliError::Usage("a seed is required: pass --seed or set `seed` in the config".into()))
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> Result<PathBuf, CliError> {
        match flag {
            Some(p) => Ok(p.to_path_buf()),
            None => self
                .output_dir
                .as_deref()
                .map(|p| self.resolve(p))
                .ok_or_else(|| CliError::Usage("an output directory is required: pass --out-dir or set `output_dir`".into())),
        }
    }

    pub fn data_source(&self) -> Result<DataSource, CliError> {
        let d = &self.data;
        let set = [d.dir.is_some(), d.files.is_some(), d.synthetic.is_some(), d.features.is_some()];
        match set.iter().filter(|&&b| b).count() {
            0 => return Err(CliError::Usage("config needs a data source: data.dir, data.files, data.synthetic or data.features".into())),
            1 => {}
            _ => return Err(CliError::Usage("set exactly one of data.dir, data.files, data.synthetic, data.features".into())),
        }
        let src = if let Some(dir) = &d.dir {
            DataSource::Files(DataFiles::in_dir(self.resolve(dir)))
        } else if let Some(f) = &d.files {
            DataSource::Files(DataFiles {
                chain: self.resolve(&f.chain),
                macro_series: self.resolve(&f.macro_series),
                dividends: self.resolve(&f.dividends),
                rates: self.resolve(&f.rates),
                underlying: self.resolve(&f.underlying),
            })
        } else if let Some(s) = &d.synthetic {
            DataSource::Synthetic(s.clone())
        } else {
            DataSource::Features(self.resolve(d.features.as_ref().expect("counted above")))
        };
        let missing: Vec<String> = match &src {
            DataSource::Files(f) => f.all().iter().filter(|p| !p.exists()).map(|p| p.display().to_string()).collect(),
            DataSource::Features(p) if !p.exists() => vec![p.display().to_string()],
            _ => vec![],
        };
        if !missing.is_empty() {
            return Err(CliError::Usage(format!("data path does not exist: {}", missing.join(", "))));
        }
        Ok(src)
    }
}
