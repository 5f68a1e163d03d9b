//! Message-passing layers.
//!
//! Every layer has a tape-level `forward` that works on [`Var`]s (used when
//! training) and a free function that runs one forward pass on plain
//! tensors (`gcn_forward`, `ehgnn_forward`, `baseline_forward`).
//!
//! Features are row-major (`n x d`), so a layer computes `H · W` where the
//! formulas in the literature write `W · h`.

mod baseline;
mod ehgnn;
mod gcn;

pub use baseline::{baseline_forward, BaselineKind, BaselineLayer};
pub use ehgnn::{ehgnn_forward, EhgnnLayer};
pub use gcn::{gcn_forward, gcn_forward_weighted, GcnLayer};

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::optim::{ParamId, ParamStore};
use crate::{Error, Result};

/// Dense affine map `x · W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.add_glorot(format!("{name}.weight"), d_in, d_out, rng);
        let bias = bias.then(|| store.add_zeros(format!("{name}.bias"), 1, d_out));
        Self {
            weight,
            bias,
            d_in,
            d_out,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        check_width("linear", self.d_in, tape.shape(x).1)?;
        let w = tape.param(store, self.weight);
        let mut y = tape.matmul(x, w)?;
        if let Some(b) = self.bias {
            let b = tape.param(store, b);
            y = tape.add_bias(y, b)?;
        }
        Ok(y)
    }
}

pub(crate) fn check_width(layer: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::InputDim {
            layer,
            expected,
            got,
        });
    }
    Ok(())
}
