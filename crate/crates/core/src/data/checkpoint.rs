use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::config::Config;
use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::network::{GigNetwork, ModelDims, Readout};
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters with everything needed to rebuild the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: Config,
    pub dims: ModelDims,
    pub params: ParamStore,
}

#[derive(Serialize)]
struct TensorOut<'a> {
    name: &'a str,
    shape: &'a [usize],
    data: Box<RawValue>,
}

#[derive(Serialize)]
struct FileOut<'a> {
    format_version: u32,
    config: &'a Config,
    dims: ModelDims,
    params: Vec<TensorOut<'a>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorIn {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    format_version: u32,
    config: Config,
    dims: ModelDims,
    params: Vec<TensorIn>,
}

/// `[x0,x1,...]` with 17 significant digits per value.
fn float_array(data: &[f64]) -> Result<Box<RawValue>> {
    let mut s = String::with_capacity(data.len() * 24 + 2);
    s.push('[');
    for (i, x) in data.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::Checkpoint(format!("non-finite value {x}")));
        }
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("{x:.16e}"));
    }
    s.push(']');
    Ok(RawValue::from_string(s)?)
}

impl Checkpoint {
    /// The readout stored in the configuration.
    pub fn readout(&self) -> Readout {
        self.config.readout.unwrap_or_default()
    }

    /// Rebuilds the network and checks the parameters against it.
    pub fn network(&self) -> Result<GigNetwork> {
        let net = GigNetwork::new(self.config.network(self.readout()), self.dims)?;
        net.check_params(&self.params)?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let params = self
            .params
            .iter()
            .map(|(name, t)| {
                Ok(TensorOut {
                    name,
                    shape: t.shape(),
                    data: float_array(t.data())?,
                })
            })
            .collect::<Result<_>>()?;
        let file = FileOut {
            format_version: CHECKPOINT_VERSION,
            config: &self.config,
            dims: self.dims,
            params,
        };
        fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
        Ok(())
    }

    /// Parses the whole file before building anything, so a damaged file
    /// never yields a partial checkpoint.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file: FileIn =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if file.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} is not supported (expected {CHECKPOINT_VERSION})",
                file.format_version
            )));
        }
        let mut params = ParamStore::new();
        for t in file.params {
            if params.contains(&t.name) {
                return Err(Error::Checkpoint(format!("tensor `{}` appears twice", t.name)));
            }
            let tensor = Tensor::new(t.shape, t.data).map_err(|e| Error::Checkpoint(format!("`{}`: {e}", t.name)))?;
            params.insert(t.name, tensor);
        }
        Ok(Self {
            config: file.config,
            dims: file.dims,
            params,
        })
    }
}

pub fn save_checkpoint(path: &Path, params: &ParamStore, config: &Config, dims: ModelDims) -> Result<()> {
    Checkpoint {
        config: config.clone(),
        dims,
        params: params.clone(),
    }
    .save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path)
}
