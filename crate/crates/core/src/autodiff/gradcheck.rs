use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
}

/// Compares tape gradients against central differences.
///
/// `f` must build a scalar loss from the store on a fresh tape. At most
/// `max_coords` coordinates per parameter are sampled (all when `None`).
/// The error of one coordinate is `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(
    store: &mut ParamStore,
    h: f64,
    max_coords: Option<usize>,
    seed: u64,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore, &mut Tape) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let mut tape = Tape::new();
    let loss = f(store, &mut tape)?;
    tape.backward(loss)?;
    let mut analytic = store.clone();
    analytic.zero_grad();
    tape.accumulate_grads(&mut analytic);

    let mut eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let out = f(s, &mut t)?;
        Ok(t.value(out).item())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_error: f64 = 0.0;
    let mut coords_checked = 0;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.tensor(id).len();
        let coords: Vec<usize> = match max_coords {
            Some(k) if k < n => sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        let grad = analytic.tensor(id).grad.clone().unwrap_or_else(|| vec![0.0; n]);
        for j in coords {
            let orig = store.tensor(id).values()[j];
            store.tensor_mut(id).values_mut()[j] = orig + h;
            let up = eval(store)?;
            store.tensor_mut(id).values_mut()[j] = orig - h;
            let down = eval(store)?;
            store.tensor_mut(id).values_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (grad[j] - numeric).abs() / grad[j].abs().max(1.0);
            if !err.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient for {}[{j}]",
                    store.name(id)
                )));
            }
            max_rel_error = max_rel_error.max(err);
            coords_checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        coords_checked,
    })
}
