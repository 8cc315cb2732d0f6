use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub fn cosine_anneal_lr(base_lr: f64, epoch: usize, total_epochs: usize, min_lr: f64) -> f64 {
    if total_epochs == 0 {
        return base_lr;
    }
    let frac = epoch.min(total_epochs) as f64 / total_epochs as f64;
    min_lr + 0.5 * (base_lr - min_lr) * (1.0 + (PI * frac).cos())
}

/// Learning rate as a function of the epoch.
pub trait Schedule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn lr(&self, base_lr: f64, epoch: usize, total_epochs: usize) -> f64;
}

#[derive(Debug)]
pub struct Constant;

impl Schedule for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn lr(&self, base_lr: f64, _: usize, _: usize) -> f64 {
        base_lr
    }
}

/// Cosine decay from `base_lr` down to `base_lr / 100`.
#[derive(Debug)]
pub struct CosineAnnealing;

impl Schedule for CosineAnnealing {
    fn name(&self) -> &'static str {
        "cosine_annealing"
    }

    fn lr(&self, base_lr: f64, epoch: usize, total_epochs: usize) -> f64 {
        cosine_anneal_lr(base_lr, epoch, total_epochs, base_lr / 100.0)
    }
}

pub type ScheduleFactory = fn() -> Arc<dyn Schedule>;

/// Schedules by name.
#[derive(Clone)]
pub struct ScheduleRegistry {
    factories: BTreeMap<&'static str, ScheduleFactory>,
}

impl ScheduleRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: ScheduleFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str) -> Result<Arc<dyn Schedule>> {
        self.factories.get(name).map(|f| f()).ok_or_else(|| Error::Unknown {
            kind: "schedule",
            name: name.to_string(),
        })
    }
}

impl Default for ScheduleRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("constant", || Arc::new(Constant));
        r.register("cosine_annealing", || Arc::new(CosineAnnealing));
        r
    }
}
