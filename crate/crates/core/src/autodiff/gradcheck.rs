use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamId, ParameterStore, Tape, Var};
use crate::error::Result;

/// Relative error floor used when both gradients are tiny.
const REL_FLOOR: f64 = 1e-8;

/// Compares reverse-mode gradients of `loss_fn` against central differences on every
/// parameter coordinate and returns the largest relative error.
///
/// `loss_fn` must be deterministic (any noise fixed by the caller). Parameter values in
/// `store` are restored afterwards; gradients are left holding the analytic result.
pub fn gradient_check<F>(store: &mut ParameterStore, epsilon: f64, loss_fn: F) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParameterStore) -> Result<Var>,
{
    gradient_check_sampled(store, epsilon, usize::MAX, 0, loss_fn)
}

/// Like [`gradient_check`] but only probes up to `max_coords` coordinates chosen uniformly
/// with the given seed.
pub fn gradient_check_sampled<F>(
    store: &mut ParameterStore,
    epsilon: f64,
    max_coords: usize,
    seed: u64,
    mut loss_fn: F,
) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParameterStore) -> Result<Var>,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, store)?;
    tape.backward(loss, store)?;
    drop(tape);

    let mut coords: Vec<(ParamId, usize)> = Vec::new();
    for id in store.ids() {
        coords.extend((0..store.get(id).len()).map(|i| (id, i)));
    }
    if coords.len() > max_coords {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = sample(&mut rng, coords.len(), max_coords).into_vec();
        picked.sort_unstable();
        coords = picked.into_iter().map(|i| coords[i]).collect();
    }

    let mut eval = |store: &ParameterStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, store)?;
        tape.value(loss).item()
    };

    let mut worst = 0.0f64;
    for (id, i) in coords {
        let analytic = store.get(id).grad().expect("populated by backward")[i];
        let original = store.get(id).data()[i];

        store.get_mut(id).data_mut()[i] = original + epsilon;
        let plus = eval(store)?;
        store.get_mut(id).data_mut()[i] = original - epsilon;
        let minus = eval(store)?;
        store.get_mut(id).data_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut store = ParameterStore::new();
        let id = store
            .add("w", Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap())
            .unwrap();
        let err = gradient_check(&mut store, 1e-5, |tape, s| {
            let w = tape.param(s, id);
            let sq = tape.mul(w, w)?;
            Ok(tape.sum(sq))
        })
        .unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn empty_model_has_zero_error() {
        let mut store = ParameterStore::new();
        let err = gradient_check(&mut store, 1e-5, |tape, _| {
            let x = tape.input(Tensor::scalar(1.0));
            Ok(tape.sum(x))
        })
        .unwrap();
        assert_eq!(err, 0.0);
    }
}
