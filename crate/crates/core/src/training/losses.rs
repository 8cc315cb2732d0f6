use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Axis, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    L1,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" => Ok(Self::CrossEntropy),
            "l1" => Ok(Self::L1),
            _ => Err(Error::Unknown {
                kind: "loss",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CrossEntropy => "cross_entropy",
            Self::L1 => "l1",
        })
    }
}

/// Mean over rows of `−log softmax(logits)[target]`.
pub fn cross_entropy_loss(tape: &mut Tape, logits: Var, targets: &[usize]) -> Result<Var> {
    tape.cross_entropy(logits, targets)
}

/// Mean absolute error. The subgradient at an exact tie is 0.
pub fn l1_loss(tape: &mut Tape, pred: Var, target: &Tensor) -> Result<Var> {
    let shape = tape.shape(pred)?.to_vec();
    if shape != target.shape() {
        return Err(Error::Shape {
            op: "l1_loss",
            lhs: shape,
            rhs: target.shape().to_vec(),
        });
    }
    let t = tape.constant(target.clone());
    let diff = tape.sub(pred, t)?;
    let abs = tape.abs(diff)?;
    tape.mean(abs, Axis::All)
}
