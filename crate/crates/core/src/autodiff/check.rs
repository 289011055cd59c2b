use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamId, ParamSet, Tape, Var};
use crate::error::{Error, Result};

/// Which parameter coordinates a finite-difference check perturbs.
#[derive(Clone, Debug)]
pub enum Coordinates {
    /// Every scalar parameter.
    All,
    /// Every coordinate of tensors with at most `per_tensor` entries, otherwise
    /// `per_tensor` coordinates drawn without replacement.
    Sample { per_tensor: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic − numeric| / max(1, |numeric|) over checked coordinates.
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compare tape gradients with central differences of `loss`.
///
/// `loss` must build the same computation on whatever tape it is handed; any
/// randomness inside it has to be reseeded per call.
pub fn finite_difference_check<F>(
    params: &ParamSet,
    eps: f64,
    coords: &Coordinates,
    loss: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Contract(format!("finite-difference eps must be > 0, got {eps}")));
    }
    let analytic = {
        let mut tape = Tape::new(params);
        let l = loss(&mut tape)?;
        tape.backward(l)?
    };

    let eval = |p: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new(p);
        let l = loss(&mut tape)?;
        Ok(tape.scalar(l))
    };

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        checked: 0,
    };
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let n = params.get(id).len();
        let picks: Vec<usize> = match coords {
            Coordinates::All => (0..n).collect(),
            Coordinates::Sample { per_tensor, .. } if n <= *per_tensor => (0..n).collect(),
            Coordinates::Sample { per_tensor, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (id.index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut v = index::sample(&mut rng, n, *per_tensor).into_vec();
                v.sort_unstable();
                v
            }
        };
        let grad = analytic.dense(id, params);
        for j in picks {
            let original = work.get(id).data()[j];
            work.get_mut(id).data_mut()[j] = original + eps;
            let plus = eval(&work)?;
            work.get_mut(id).data_mut()[j] = original - eps;
            let minus = eval(&work)?;
            work.get_mut(id).data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let err = (grad[j] - numeric).abs() / numeric.abs().max(1.0);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst_param = Some(params.name(id).to_string());
                    report.worst_index = j;
                }
            }
        }
    }
    Ok(report)
}
