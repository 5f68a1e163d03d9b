//! Central finite-difference gradient checks.
//!
//! The numeric side only ever evaluates the forward pass, so it is
//! independent of every backward rule it checks. To check gradients with
//! respect to inputs, register the inputs in the [`ParamStore`] as well.

use crate::autodiff::{Tape, Var};
use crate::optim::ParamStore;
use crate::tensor::Tensor;
use crate::Result;

/// Step used by the acceptance checks.
pub const STEP: f64 = 1e-5;
/// Norms below this are treated as this when forming the relative error.
pub const NORM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub analytic: Tensor,
    pub numeric: Tensor,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// `‖a − n‖ / max(‖a‖ + ‖n‖, NORM_FLOOR)` over a whole tensor.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let norm = |t: &Tensor| t.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    diff / (norm(analytic) + norm(numeric)).max(NORM_FLOOR)
}

/// Compares backward-pass gradients of every parameter in `store` against
/// central differences of `loss`. `loss` must build a scalar on the tape.
pub fn check<F>(store: &ParamStore, h: f64, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let l = loss(&mut tape, store)?;
    let grads = tape.backward(l)?;
    let mut analytic: Vec<Tensor> = store
        .iter()
        .map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols()))
        .collect();
    for (id, g) in grads.params() {
        analytic[id.index()].add_assign(g);
    }

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let l = loss(&mut tape, s)?;
        Ok(tape.value(l).data()[0])
    };

    let mut probe = store.clone();
    let mut params = Vec::with_capacity(store.len());
    for ((id, p), analytic) in store.iter().zip(analytic) {
        let mut numeric = Tensor::zeros(p.value.rows(), p.value.cols());
        for k in 0..p.value.len() {
            let orig = p.value.data()[k];
            probe.value_mut(id).data_mut()[k] = orig + h;
            let up = eval(&probe)?;
            probe.value_mut(id).data_mut()[k] = orig - h;
            let down = eval(&probe)?;
            probe.value_mut(id).data_mut()[k] = orig;
            numeric.data_mut()[k] = (up - down) / (2.0 * h);
        }
        params.push(ParamCheck {
            name: p.name.clone(),
            rel_error: relative_error(&analytic, &numeric),
            analytic,
            numeric,
        });
    }
    Ok(GradCheckReport { params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Reduce;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn primitive_ops_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let a = store.add("a", random(&mut rng, 4, 3));
        let b = store.add("b", random(&mut rng, 3, 2));
        let bias = store.add("bias", random(&mut rng, 1, 2));
        let w = store.add("w", random(&mut rng, 4, 1));
        let theta = store.add("theta", random(&mut rng, 4, 6));
        let target = random(&mut rng, 4, 2);
        let idx: Arc<[usize]> = vec![2, 0, 2, 1].into();
        let report = check(&store, STEP, |tape, s| {
            let a = tape.param(s, a);
            let b = tape.param(s, b);
            let bias = tape.param(s, bias);
            let w = tape.param(s, w);
            let theta = tape.param(s, theta);
            let ab = tape.matmul(a, b)?;
            let ab = tape.add_bias(ab, bias)?;
            let t = tape.tanh(ab);
            let sm = tape.row_softmax(t);
            let sg = tape.sigmoid(ab);
            let mixed = tape.mul(sm, sg)?;
            let scaled = tape.row_scale(mixed, w)?;
            let gathered = tape.gather(scaled, &idx)?;
            let scattered = tape.scatter(gathered, &idx, 4, Reduce::Mean)?;
            let vm = tape.vec_mat(a, theta, 2)?;
            let sum = tape.add(scattered, vm)?;
            let tr = tape.transpose(sum);
            let tr = tape.transpose(tr);
            let cat = tape.concat_cols(tr, mixed)?;
            let sq = tape.mul(cat, cat)?;
            let l1 = tape.sum(sq);
            let l2 = tape.mse(sum, &target)?;
            let l3 = tape.softmax_cross_entropy(sum, &[0, 1, 1, 0])?;
            let l = tape.add(l1, l2)?;
            Ok(tape.add(l, l3)?)
        })
        .unwrap();
        assert!(report.max_rel_error() < 1e-6, "{:?}", report.worst());
    }

    #[test]
    fn scatter_sum_is_adjoint_of_gather() {
        // <gather(x), y> = <x, scatter_sum(y)>, and the checker sees it via grads.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random(&mut rng, 5, 2);
        let y = random(&mut rng, 7, 2);
        let idx: Arc<[usize]> = vec![0, 4, 4, 2, 1, 0, 3].into();
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let g = tape.gather(xv, &idx).unwrap();
        let s = tape.scatter(yv, &idx, 5, Reduce::Sum).unwrap();
        let lhs: f64 = tape.value(g).data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(tape.value(s).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);

        let mut store = ParamStore::new();
        let xp = store.add("x", x);
        let report = check(&store, STEP, |tape, st| {
            let xv = tape.param(st, xp);
            let g = tape.gather(xv, &idx)?;
            let s = tape.scatter(g, &idx, 5, Reduce::Sum)?;
            let sq = tape.mul(s, s)?;
            Ok(tape.sum(sq))
        })
        .unwrap();
        assert!(report.max_rel_error() < 1e-6);
    }
}
