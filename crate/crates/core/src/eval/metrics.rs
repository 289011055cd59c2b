use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Intensity, LabelBundle, Polarity, SCORE_MAX, SCORE_MIN};
use crate::models::{ModelSpec, MultiTaskOutput};

fn check_pair(op: &'static str, a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim(op, &[a.len()], &[b.len()]));
    }
    if a.len() < min {
        return Err(Error::Contract(format!("{op} needs at least {min} pairs, got {}", a.len())));
    }
    Ok(())
}

/// Sample Pearson correlation. A constant input has no defined correlation
/// and is reported as an error rather than 0.
pub fn pearson_cc(preds: &[f64], golds: &[f64]) -> Result<f64> {
    check_pair("pearson_cc", preds, golds, 2)?;
    let n = preds.len() as f64;
    let mx = preds.iter().sum::<f64>() / n;
    let my = golds.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in preds.iter().zip(golds) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        let which = if sxx == 0.0 { "predictions" } else { "gold scores" };
        return Err(Error::UndefinedCorrelation(format!("{which} are constant")));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean_abs_error(preds: &[f64], golds: &[f64]) -> Result<f64> {
    check_pair("mean_abs_error", preds, golds, 1)?;
    Ok(preds.iter().zip(golds).map(|(p, g)| (p - g).abs()).sum::<f64>() / preds.len() as f64)
}

/// Auxiliary-head accuracies; `None` when the head is absent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxAccuracy {
    pub polarity: Option<f64>,
    pub intensity: Option<f64>,
}

/// Positive when the probability is at least 0.5.
pub fn predicted_polarity(prob: f64) -> Polarity {
    if prob >= 0.5 {
        Polarity::Positive
    } else {
        Polarity::Negative
    }
}

/// Argmax with ties going to the lowest class index.
pub fn predicted_intensity(probs: &[f64; 4]) -> Intensity {
    let mut best = 0;
    for i in 1..4 {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    Intensity::from_index(best).expect("index below 4")
}

/// Accuracy of each auxiliary head present in every output. A head missing
/// from any output is skipped for the whole list.
pub fn aux_accuracy(outputs: &[MultiTaskOutput], labels: &[LabelBundle]) -> Result<AuxAccuracy> {
    if outputs.len() != labels.len() {
        return Err(Error::dim("aux_accuracy", &[outputs.len()], &[labels.len()]));
    }
    if outputs.is_empty() {
        return Ok(AuxAccuracy::default());
    }
    let n = outputs.len() as f64;
    let polarity = outputs.iter().all(|o| o.polarity.is_some()).then(|| {
        let hits = outputs
            .iter()
            .zip(labels)
            .filter(|(o, l)| predicted_polarity(o.polarity.expect("checked")) == l.polarity)
            .count();
        hits as f64 / n
    });
    let intensity = outputs.iter().all(|o| o.intensity.is_some()).then(|| {
        let hits = outputs
            .iter()
            .zip(labels)
            .filter(|(o, l)| predicted_intensity(o.intensity.as_ref().expect("checked")) == l.intensity)
            .count();
        hits as f64 / n
    });
    Ok(AuxAccuracy { polarity, intensity })
}

/// Uniform draws on `[−3, 3]`.
pub fn random_baseline(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Empty { what: "random baseline" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| rng.gen_range(SCORE_MIN..=SCORE_MAX)).collect())
}

/// Expected MAE of a uniform `[−3, 3]` guess against uniform `[−3, 3]` gold scores.
pub const UNIFORM_BASELINE_MAE: f64 = (SCORE_MAX - SCORE_MIN) / 3.0;

/// Expected MAE of a uniform `[−3, 3]` guess against these gold scores:
/// the mean of `E|U − g| = (9 + g²) / 6`.
pub fn expected_random_mae(golds: &[f64]) -> Result<f64> {
    if golds.is_empty() {
        return Err(Error::Empty { what: "gold scores" });
    }
    let half = (SCORE_MAX - SCORE_MIN) / 2.0;
    let per = |g: f64| {
        let g = g.clamp(SCORE_MIN, SCORE_MAX);
        (half * half + g * g) / (2.0 * half)
    };
    Ok(golds.iter().map(|&g| per(g)).sum::<f64>() / golds.len() as f64)
}

/// Test-set metrics for one trained cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub spec: ModelSpec,
    pub seed: u64,
    /// `None` when the correlation is undefined (constant predictions).
    pub cc: Option<f64>,
    pub mae: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_accuracy: Option<f64>,
    pub n: usize,
}

pub fn evaluate(
    model_id: &str,
    spec: &ModelSpec,
    seed: u64,
    outputs: &[MultiTaskOutput],
    labels: &[LabelBundle],
) -> Result<EvalReport> {
    let preds: Vec<f64> = outputs.iter().map(|o| o.score).collect();
    let golds: Vec<f64> = labels.iter().map(|l| l.score).collect();
    let mae = mean_abs_error(&preds, &golds)?;
    let cc = match pearson_cc(&preds, &golds) {
        Ok(c) => Some(c),
        Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    let acc = aux_accuracy(outputs, labels)?;
    Ok(EvalReport {
        model_id: model_id.to_string(),
        spec: spec.clone(),
        seed,
        cc,
        mae,
        polarity_accuracy: acc.polarity,
        intensity_accuracy: acc.intensity,
        n: outputs.len(),
    })
}
