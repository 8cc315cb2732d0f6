use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Metric;
use crate::gsg::{GsgConfig, ProxyInit};
use crate::network::{NetworkConfig, Readout};
use crate::training::{LossKind, TrainConfig};

/// Every knob in one flat JSON object. Missing keys take their defaults;
/// unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub rho_proxy: f64,
    pub k_gig: usize,
    pub similar_fraction: f64,
    pub metric: Metric,
    pub proxy_init: ProxyInit,

    pub num_hidden_layers: usize,
    pub hidden_dim: usize,
    pub updater: String,
    pub layer_norm: bool,
    pub disable_ggu: bool,
    pub disable_gvu: bool,
    pub ggu_first: bool,
    /// Taken from the dataset's task type when absent.
    pub readout: Option<Readout>,

    pub epochs: usize,
    pub samples_per_gig: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub schedule: String,
    pub loss: Option<LossKind>,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let t = TrainConfig::default();
        let (g, n) = (t.gsg, t.network);
        Self {
            rho_proxy: g.rho_proxy,
            k_gig: g.k_gig,
            similar_fraction: g.similar_fraction,
            metric: g.metric,
            proxy_init: g.proxy_init,
            num_hidden_layers: n.num_hidden_layers,
            hidden_dim: n.hidden_dim,
            updater: n.updater,
            layer_norm: n.layer_norm,
            disable_ggu: n.disable_ggu,
            disable_gvu: n.disable_gvu,
            ggu_first: n.ggu_first,
            readout: None,
            epochs: t.epochs,
            samples_per_gig: t.samples_per_gig,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            schedule: t.schedule,
            loss: t.loss,
            seed: t.seed,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn gsg(&self) -> GsgConfig {
        GsgConfig {
            rho_proxy: self.rho_proxy,
            k_gig: self.k_gig,
            similar_fraction: self.similar_fraction,
            metric: self.metric,
            proxy_init: self.proxy_init,
        }
    }

    /// The readout, falling back to `task` when none is set. A set readout
    /// that disagrees with `task` is an error.
    pub fn resolve_readout(&self, task: Option<Readout>) -> Result<Readout> {
        match (self.readout, task) {
            (Some(r), Some(t)) if r != t => Err(Error::Config(format!(
                "readout {r} does not match the dataset task {t}"
            ))),
            (Some(r), _) | (None, Some(r)) => Ok(r),
            (None, None) => Ok(Readout::default()),
        }
    }

    pub fn network(&self, readout: Readout) -> NetworkConfig {
        NetworkConfig {
            num_hidden_layers: self.num_hidden_layers,
            hidden_dim: self.hidden_dim,
            updater: self.updater.clone(),
            layer_norm: self.layer_norm,
            disable_ggu: self.disable_ggu,
            disable_gvu: self.disable_gvu,
            ggu_first: self.ggu_first,
            readout,
        }
    }

    pub fn train(&self, readout: Readout) -> Result<TrainConfig> {
        let t = TrainConfig {
            epochs: self.epochs,
            samples_per_gig: self.samples_per_gig,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            schedule: self.schedule.clone(),
            loss: self.loss,
            seed: self.seed,
            network: self.network(readout),
            gsg: self.gsg(),
        };
        t.validate()?;
        Ok(t)
    }
}
