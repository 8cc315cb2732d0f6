use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::layers::{hidden_layer_forward, output_layer_forward, GigState, LayerFlags};
use super::layout::PreparedSample;
use crate::autodiff::{BoundParams, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::GigRng;
use crate::tensor::Tensor;
use crate::updaters::{init_params, Init, ParamSpec, Scope, Updater, UpdaterOptions, UpdaterRegistry};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// One class per GIG vertex, from its mean-pooled graph vertices.
    #[default]
    GraphClass,
    /// One value per GIG vertex, from its mean-pooled graph vertices.
    GraphReg,
    VertexClass,
    /// Classes from `[v_src, v_dst, e]` per graph edge.
    EdgeClass,
    /// One class for the whole sample, from all graph vertices pooled.
    ClipClass,
}

impl Readout {
    pub fn is_regression(self) -> bool {
        self == Self::GraphReg
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| Error::Unknown {
            kind: "readout",
            name: s.to_string(),
        })
    }
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_hidden_layers: usize,
    pub hidden_dim: usize,
    pub updater: String,
    pub layer_norm: bool,
    pub disable_ggu: bool,
    pub disable_gvu: bool,
    pub ggu_first: bool,
    pub readout: Readout,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_hidden_layers: 2,
            hidden_dim: 16,
            updater: "gatedgcn".into(),
            layer_norm: true,
            disable_ggu: false,
            disable_gvu: false,
            ggu_first: false,
            readout: Readout::GraphClass,
        }
    }
}

impl NetworkConfig {
    pub fn flags(&self) -> LayerFlags {
        LayerFlags {
            disable_gvu: self.disable_gvu,
            disable_ggu: self.disable_ggu,
            ggu_first: self.ggu_first,
        }
    }
}

/// Input and output widths fixed by the dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vertex_dim: usize,
    pub edge_dim: usize,
    pub outputs: usize,
}

struct LayerScopes {
    gvu: String,
    ggu: String,
}

/// Embedding, hidden layers, output layer and readout head.
pub struct GigNetwork {
    cfg: NetworkConfig,
    dims: ModelDims,
    updater: Arc<dyn Updater>,
    hidden: Vec<LayerScopes>,
    output: LayerScopes,
}

impl fmt::Debug for GigNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GigNetwork")
            .field("cfg", &self.cfg)
            .field("dims", &self.dims)
            .finish()
    }
}

fn broadcast_row(tape: &mut Tape, row: Var, n: usize) -> Result<Var> {
    tape.gather_rows(row, &Arc::from(vec![0; n]))
}

fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let rows = tape.shape(x)?[0];
    let xw = tape.matmul(x, w)?;
    let bias = broadcast_row(tape, b, rows)?;
    tape.add(xw, bias)
}

impl GigNetwork {
    pub fn new(cfg: NetworkConfig, dims: ModelDims) -> Result<Self> {
        Self::with_registry(cfg, dims, &UpdaterRegistry::default())
    }

    pub fn with_registry(cfg: NetworkConfig, dims: ModelDims, registry: &UpdaterRegistry) -> Result<Self> {
        if cfg.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if dims.outputs == 0 {
            return Err(Error::Config("the readout needs at least one output".into()));
        }
        let updater = registry.create(
            &cfg.updater,
            UpdaterOptions {
                layer_norm: cfg.layer_norm,
            },
        )?;
        let scopes = |name: &str| LayerScopes {
            gvu: format!("{name}.gvu"),
            ggu: format!("{name}.ggu"),
        };
        Ok(Self {
            hidden: (0..cfg.num_hidden_layers).map(|l| scopes(&format!("layer{l}"))).collect(),
            output: scopes("output"),
            cfg,
            dims,
            updater,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn updater(&self) -> &dyn Updater {
        self.updater.as_ref()
    }

    /// Every parameter the network reads, with full names.
    pub fn param_specs(&self) -> Vec<(String, ParamSpec)> {
        let d = self.cfg.hidden_dim;
        let ModelDims {
            vertex_dim,
            edge_dim,
            outputs,
        } = self.dims;
        let mut specs = vec![
            ("embed.vertex".to_string(), ParamSpec::new("W", vec![vertex_dim, d], Init::Xavier)),
            ("embed.vertex".to_string(), ParamSpec::new("b", vec![1, d], Init::Zeros)),
        ];
        if edge_dim > 0 {
            specs.push(("embed.edge".into(), ParamSpec::new("W", vec![edge_dim, d], Init::Xavier)));
            specs.push(("embed.edge".into(), ParamSpec::new("b", vec![1, d], Init::Zeros)));
        } else {
            specs.push(("embed.edge".into(), ParamSpec::new("const", vec![1, d], Init::Xavier)));
        }
        let unit = self.updater.param_specs(d);
        for scope in self.hidden.iter().chain([&self.output]) {
            if !self.cfg.disable_gvu {
                specs.extend(unit.iter().map(|s| (scope.gvu.clone(), s.clone())));
            }
            if !self.cfg.disable_ggu {
                specs.extend(unit.iter().map(|s| (scope.ggu.clone(), s.clone())));
            }
        }
        let head_in = if self.cfg.readout == super::Readout::EdgeClass { 3 * d } else { d };
        specs.push(("readout".into(), ParamSpec::new("W", vec![head_in, outputs], Init::Xavier)));
        specs.push(("readout".into(), ParamSpec::new("b", vec![1, outputs], Init::Zeros)));
        specs
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = GigRng::new(seed);
        for (prefix, spec) in self.param_specs() {
            init_params(std::slice::from_ref(&spec), &prefix, &mut store, &mut rng);
        }
        store
    }

    /// Checks that `store` holds exactly the network's parameters.
    pub fn check_params(&self, store: &ParamStore) -> Result<()> {
        let specs = self.param_specs();
        for (prefix, spec) in &specs {
            let name = format!("{prefix}.{}", spec.name);
            let t = store.get(&name).ok_or_else(|| Error::MissingParam(name.clone()))?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::ParamShape {
                    name,
                    expected: spec.shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
        }
        if store.len() != specs.len() {
            let known: std::collections::BTreeSet<String> =
                specs.iter().map(|(p, s)| format!("{p}.{}", s.name)).collect();
            if let Some(extra) = store.names().find(|n| !known.contains(*n)) {
                return Err(Error::UnexpectedParam(extra.to_string()));
            }
        }
        Ok(())
    }

    fn check_sample(&self, prep: &PreparedSample) -> Result<()> {
        if prep.vertex_dim() != self.dims.vertex_dim {
            return Err(Error::Shape {
                op: "vertex embedding",
                lhs: prep.vertex_features.shape().to_vec(),
                rhs: vec![self.dims.vertex_dim, self.cfg.hidden_dim],
            });
        }
        if prep.layout.total_edges() > 0 && prep.edge_dim() != self.dims.edge_dim {
            return Err(Error::Shape {
                op: "edge embedding",
                lhs: prep.edge_features.shape().to_vec(),
                rhs: vec![self.dims.edge_dim, self.cfg.hidden_dim],
            });
        }
        Ok(())
    }

    /// Maps raw features to width `d`. Local proxies share the vertex map.
    /// Proxy and GIG edges carry zero input features, so they embed to the
    /// edge bias (or the learned constant when there are no edge features).
    /// Global proxies start at zero.
    pub fn embed(&self, tape: &mut Tape, bound: &BoundParams, prep: &PreparedSample) -> Result<GigState> {
        self.check_sample(prep)?;
        let lay = &prep.layout;
        let (wv, bv) = (bound.get("embed.vertex.W")?, bound.get("embed.vertex.b")?);
        let raw_v = tape.constant(prep.vertex_features.clone());
        let v = affine(tape, raw_v, wv, bv)?;
        let raw_p = tape.constant(prep.local_proxies.clone());
        let pl = affine(tape, raw_p, wv, bv)?;
        let (e, blank) = if self.dims.edge_dim > 0 {
            let raw_e = if lay.total_edges() == 0 {
                tape.constant(Tensor::zeros(&[0, self.dims.edge_dim]))
            } else {
                tape.constant(prep.edge_features.clone())
            };
            let b = bound.get("embed.edge.b")?;
            (affine(tape, raw_e, bound.get("embed.edge.W")?, b)?, b)
        } else {
            let c = bound.get("embed.edge.const")?;
            (broadcast_row(tape, c, lay.total_edges())?, c)
        };
        Ok(GigState {
            v,
            e,
            pl,
            pg: tape.constant(Tensor::zeros(&[lay.num_gig, self.cfg.hidden_dim])),
            e_in: broadcast_row(tape, blank, lay.pin_vertex.len())?,
            e_out: broadcast_row(tape, blank, lay.pout_vertex.len())?,
            e_gig: broadcast_row(tape, blank, lay.gig_src.len())?,
        })
    }

    /// Runs the hidden layers and the output layer on an embedded state.
    pub fn propagate(&self, tape: &mut Tape, bound: &BoundParams, prep: &PreparedSample, s: GigState) -> Result<GigState> {
        let u = self.updater.as_ref();
        let flags = self.cfg.flags();
        let mut s = s;
        for scope in &self.hidden {
            let (gvu, ggu) = (Scope::new(bound, &scope.gvu), Scope::new(bound, &scope.ggu));
            s = hidden_layer_forward(tape, u, gvu, ggu, &prep.layout, flags, s)?;
        }
        let (gvu, ggu) = (Scope::new(bound, &self.output.gvu), Scope::new(bound, &self.output.ggu));
        output_layer_forward(tape, u, gvu, ggu, &prep.layout, flags, s)
    }

    pub fn readout(&self, tape: &mut Tape, bound: &BoundParams, prep: &PreparedSample, s: GigState) -> Result<Var> {
        let lay = &prep.layout;
        let (w, b) = (bound.get("readout.W")?, bound.get("readout.b")?);
        let x = match self.cfg.readout {
            super::Readout::GraphClass | super::Readout::GraphReg => {
                let sums = tape.scatter_add_rows(s.v, &lay.vertex_owner, lay.num_gig)?;
                tape.scale_rows(sums, &lay.inv_sizes)?
            }
            super::Readout::VertexClass => s.v,
            super::Readout::EdgeClass => {
                let src = tape.gather_rows(s.v, &lay.edge_src)?;
                let dst = tape.gather_rows(s.v, &lay.edge_dst)?;
                tape.concat_cols(&[src, dst, s.e])?
            }
            super::Readout::ClipClass => {
                let n = lay.total_vertices();
                let sums = tape.scatter_add_rows(s.v, &Arc::from(vec![0; n]), 1)?;
                tape.scale(sums, 1.0 / n as f64)?
            }
        };
        affine(tape, x, w, b)
    }

    /// Predictions: `[I×c]` for graph heads, `[N_total×c]` for vertex
    /// heads, `[E_total×c]` for edge heads and `[1×c]` for clip heads.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundParams, prep: &PreparedSample) -> Result<Var> {
        let s = self.embed(tape, bound, prep)?;
        let s = self.propagate(tape, bound, prep, s)?;
        self.readout(tape, bound, prep, s)
    }

    /// Forward pass without keeping the tape.
    pub fn predict(&self, params: &ParamStore, prep: &PreparedSample) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, prep)?;
        tape.tensor(out)
    }
}
