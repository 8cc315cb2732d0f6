//! Edge and vertex updating functions shared by every layer of the network.
//!
//! Updaters work on row-batched matrices: one row per edge or vertex, all of
//! width `d`. The same updater instance and parameter scope serve graph
//! edges, proxy edges and GIG edges (and graph vertices, local proxies and
//! global proxies) within one layer role.

mod gated_gcn;
mod gcn;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use gated_gcn::GatedGcn;
pub use gcn::Gcn;

use crate::autodiff::{BoundParams, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::GigRng;
use crate::tensor::Tensor;

/// Messages arriving at a set of vertices: row `m` of `edges` and
/// `neighbors` is delivered to vertex row `targets[m]`.
#[derive(Clone, Debug)]
pub struct Messages {
    pub edges: Var,
    pub neighbors: Var,
    pub targets: Arc<[usize]>,
}

/// A named parameter group, e.g. `layer0.gvu`.
#[derive(Clone, Copy)]
pub struct Scope<'a> {
    bound: &'a BoundParams,
    prefix: &'a str,
}

impl<'a> Scope<'a> {
    pub fn new(bound: &'a BoundParams, prefix: &'a str) -> Self {
        Self { bound, prefix }
    }

    pub fn get(&self, local: &str) -> Result<Var> {
        self.bound.get(&format!("{}.{local}", self.prefix))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    Xavier,
    Ones,
    Zeros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: &'static str, shape: Vec<usize>, init: Init) -> Self {
        Self { name, shape, init }
    }
}

/// Creates one tensor per spec under `prefix`.
pub fn init_params(specs: &[ParamSpec], prefix: &str, store: &mut ParamStore, rng: &mut GigRng) {
    for spec in specs {
        let n: usize = spec.shape.iter().product();
        let data = match spec.init {
            Init::Ones => vec![1.0; n],
            Init::Zeros => vec![0.0; n],
            Init::Xavier => {
                let fan: usize = spec.shape.iter().take(2).sum();
                let a = (6.0 / fan.max(1) as f64).sqrt();
                (0..n).map(|_| rng.uniform_range(-a, a)).collect()
            }
        };
        let t = Tensor::new(spec.shape.clone(), data).expect("spec shape matches data");
        store.insert(format!("{prefix}.{}", spec.name), t);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdaterOptions {
    pub layer_norm: bool,
}

impl Default for UpdaterOptions {
    fn default() -> Self {
        Self { layer_norm: true }
    }
}

pub trait Updater: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn param_specs(&self, d: usize) -> Vec<ParamSpec>;

    /// `e`, `src` and `dst` are `[E×d]`; returns the updated `[E×d]` edges.
    fn edge_update(&self, tape: &mut Tape, p: Scope<'_>, e: Var, src: Var, dst: Var) -> Result<Var>;

    /// `v` is `[N×d]`; returns the updated `[N×d]` vertices.
    fn vertex_update(&self, tape: &mut Tape, p: Scope<'_>, v: Var, msgs: &Messages) -> Result<Var>;

    /// Whether `edge_update` can change anything. Lets callers skip it.
    fn updates_edges(&self) -> bool {
        true
    }
}

pub type UpdaterFactory = fn(UpdaterOptions) -> Arc<dyn Updater>;

/// Updater kinds by name.
#[derive(Clone)]
pub struct UpdaterRegistry {
    factories: BTreeMap<&'static str, UpdaterFactory>,
}

impl UpdaterRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: UpdaterFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str, options: UpdaterOptions) -> Result<Arc<dyn Updater>> {
        self.factories
            .get(name)
            .map(|f| f(options))
            .ok_or_else(|| Error::Unknown {
                kind: "updater",
                name: name.to_string(),
            })
    }
}

impl Default for UpdaterRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("gatedgcn", |o| Arc::new(GatedGcn::new(o)));
        r.register("gcn", |_| Arc::new(Gcn));
        r
    }
}

pub fn create_updater(name: &str, options: UpdaterOptions) -> Result<Arc<dyn Updater>> {
    UpdaterRegistry::default().create(name, options)
}

/// Number of messages per target row.
pub(crate) fn in_degrees(targets: &[usize], rows: usize) -> Vec<usize> {
    let mut deg = vec![0; rows];
    for &t in targets {
        deg[t] += 1;
    }
    deg
}
