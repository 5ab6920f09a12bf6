//! JSON experiment recipes: where the data comes from, the model shape and
//! the training settings.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::load::{load_csv, RawTable, Schema};
use crate::data::split::DatasetSplit;
use crate::data::synthetic::{generate, SyntheticSpec};
use crate::error::{Result, SpamError};
use crate::model::{SpamModel, Task};
use crate::neural::{Arch, FeatureNetBank};
use crate::optim::TrainConfig;
use crate::poly::{RankSpec, SpamParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// CSV file plus a column schema; relative paths resolve against the
    /// recipe's directory.
    Csv { path: PathBuf, schema: PathBuf },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self, base: &Path) -> Result<RawTable> {
        match self {
            DataSource::Csv { path, schema } => {
                let schema = Schema::load(&base.join(schema))?;
                load_csv(&base.join(path), &schema)
            }
            DataSource::Synthetic(spec) => generate(spec),
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralConfig {
    pub arch: Arch,
    #[serde(default = "one")]
    pub subnets: usize,
    #[serde(default)]
    pub tie_orders: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Ranks of orders 2, 3, ...; empty for a linear model.
    pub ranks: Vec<usize>,
    pub neural: Option<NeuralConfig>,
}

impl ModelConfig {
    pub fn rank_spec(&self) -> Result<RankSpec> {
        RankSpec::new(self.ranks.len() + 1, self.ranks.clone())
    }

    /// Freshly initialized model for `d` raw features.
    pub fn build(&self, d: usize, task: Task, num_classes: usize, seed: u64) -> Result<SpamModel> {
        let spec = self.rank_spec()?;
        let outputs = task.num_outputs(num_classes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = match &self.neural {
            None => SpamModel::linear(SpamParams::random(d, outputs, spec, &mut rng), task),
            Some(n) => {
                let bank = FeatureNetBank::init(
                    n.arch,
                    d,
                    spec.degree(),
                    n.subnets,
                    seed.wrapping_add(1),
                    n.tie_orders,
                )?;
                let params = SpamParams::random(bank.output_dim(), outputs, spec, &mut rng);
                SpamModel::neural(params, bank, task)
            }
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Directory that relative data paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SpamError::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| SpamError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn dataset(&self) -> Result<DatasetSplit> {
        let table = self.data.load(&self.base_dir)?;
        DatasetSplit::from_table(&table, self.split_seed)
    }
}
