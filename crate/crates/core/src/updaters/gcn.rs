use std::sync::Arc;

use super::{in_degrees, Init, Messages, ParamSpec, Scope, Updater};
use crate::autodiff::{Tape, Var};
use crate::error::Result;

/// Plain graph convolution: `relu(mean(v ∪ neighbours)·W_U)`. Edges pass
/// through unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct Gcn;

impl Updater for Gcn {
    fn name(&self) -> &'static str {
        "gcn"
    }

    fn param_specs(&self, d: usize) -> Vec<ParamSpec> {
        vec![ParamSpec::new("W_U", vec![d, d], Init::Xavier)]
    }

    fn edge_update(&self, _tape: &mut Tape, _p: Scope<'_>, e: Var, _src: Var, _dst: Var) -> Result<Var> {
        Ok(e)
    }

    fn vertex_update(&self, tape: &mut Tape, p: Scope<'_>, v: Var, msgs: &Messages) -> Result<Var> {
        let rows = tape.shape(v)?[0];
        let incoming = tape.scatter_add_rows(msgs.neighbors, &msgs.targets, rows)?;
        let total = tape.add(v, incoming)?;
        let inv: Arc<[f64]> = in_degrees(&msgs.targets, rows)
            .into_iter()
            .map(|k| 1.0 / (k + 1) as f64)
            .collect();
        let mean = tape.scale_rows(total, &inv)?;
        let out = tape.matmul(mean, p.get("W_U")?)?;
        tape.relu(out)
    }

    fn updates_edges(&self) -> bool {
        false
    }
}
