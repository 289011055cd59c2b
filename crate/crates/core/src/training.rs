//! Losses, Adam and the mini-batch training loop.
//!
//! The objective for one batch is
//! `main_weight · MAE + aux_weight · (BCE + CCE) + L2`, where the auxiliary
//! terms appear only for heads the model has and the L2 term is added once
//! per batch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, ParamSet, Tape, Var};
use crate::data::AlignedSegment;
use crate::error::{Error, Result};
use crate::labels::{encode_targets, TargetRecord};
use crate::models::{HeadVars, Network, TaskSet};

/// Probability floor used by both cross-entropy losses.
pub const PROB_FLOOR: f64 = 1e-12;

/// Container kind for per-epoch history records.
pub const HISTORY_KIND: &str = "mmsa-history";

/// Mean absolute error between two equal-length vectors.
pub fn mae_loss(tape: &mut Tape<'_>, pred: Var, target: Var) -> Result<Var> {
    let d = tape.sub(pred, target)?;
    let a = tape.abs(d);
    Ok(tape.mean(a))
}

/// Mean binary cross-entropy of probabilities against 0/1 targets.
pub fn bce_loss(tape: &mut Tape<'_>, prob: Var, target: Var) -> Result<Var> {
    let t = tape.value(target).to_vec();
    if t.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Contract("binary targets must be 0 or 1".into()));
    }
    let p = tape.clamp(prob, PROB_FLOOR, 1.0 - PROB_FLOOR);
    let lp = tape.ln(p)?;
    let q = tape.affine(p, -1.0, 1.0);
    let lq = tape.ln(q)?;
    let not_t = tape.constant_vector(t.iter().map(|v| 1.0 - v).collect());
    let a = tape.mul(lp, target)?;
    let b = tape.mul(lq, not_t)?;
    let s = tape.add(a, b)?;
    let m = tape.mean(s);
    Ok(tape.scale(m, -1.0))
}

/// Mean categorical cross-entropy; one probability vector per target.
pub fn cce_loss(tape: &mut Tape<'_>, probs: &[Var], targets: &[[f64; 4]]) -> Result<Var> {
    if probs.len() != targets.len() || probs.is_empty() {
        return Err(Error::dim("cce_loss", &[probs.len()], &[targets.len()]));
    }
    let mut picked = Vec::with_capacity(probs.len());
    for (&p, t) in probs.iter().zip(targets) {
        let class = one_hot_index(t)?;
        if tape.shape(p) != [t.len()] {
            return Err(Error::dim("cce_loss", tape.shape(p), &[t.len()]));
        }
        picked.push(tape.slice(p, class, 1)?);
    }
    let v = tape.concat(&picked)?;
    let c = tape.clamp(v, PROB_FLOOR, 1.0);
    let l = tape.ln(c)?;
    let m = tape.mean(l);
    Ok(tape.scale(m, -1.0))
}

fn one_hot_index(t: &[f64]) -> Result<usize> {
    let ones = t.iter().filter(|&&v| v == 1.0).count();
    let zeros = t.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || ones + zeros != t.len() {
        return Err(Error::Contract(format!("target {t:?} is not one-hot")));
    }
    Ok(t.iter().position(|&v| v == 1.0).expect("one entry is 1"))
}

/// Per-task loss values of one batch (or an average over batches).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub main: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
    pub l2: f64,
    pub total: f64,
}

/// The weighted objective from its components, in the order the tape sums them.
pub fn combine_losses(main: f64, polarity: Option<f64>, intensity: Option<f64>, l2: f64, config: &TrainConfig) -> f64 {
    let mut total = config.main_weight * main;
    if let Some(p) = polarity {
        total += config.aux_weight * p;
    }
    if let Some(i) = intensity {
        total += config.aux_weight * i;
    }
    total + l2
}

/// Loss nodes of one batch.
#[derive(Clone, Copy, Debug)]
pub struct BatchLoss {
    pub total: Var,
    pub main: Var,
    pub polarity: Option<Var>,
    pub intensity: Option<Var>,
    pub l2: Option<Var>,
}

impl BatchLoss {
    pub fn breakdown(&self, tape: &Tape<'_>) -> LossBreakdown {
        LossBreakdown {
            main: tape.scalar(self.main),
            polarity: self.polarity.map(|v| tape.scalar(v)),
            intensity: self.intensity.map(|v| tape.scalar(v)),
            l2: self.l2.map_or(0.0, |v| tape.scalar(v)),
            total: tape.scalar(self.total),
        }
    }
}

/// Record the weighted multi-task objective over a batch of head outputs.
pub fn multi_task_loss(
    tape: &mut Tape<'_>,
    tasks: TaskSet,
    heads: &[HeadVars],
    targets: &[TargetRecord],
    l2: Option<Var>,
    config: &TrainConfig,
) -> Result<BatchLoss> {
    if heads.is_empty() || heads.len() != targets.len() {
        return Err(Error::dim("multi_task_loss", &[heads.len()], &[targets.len()]));
    }
    if heads
        .iter()
        .any(|h| h.polarity.is_some() != tasks.polarity || h.intensity.is_some() != tasks.intensity)
    {
        return Err(Error::Contract(format!("head outputs do not match task set {tasks}")));
    }
    let scores: Vec<Var> = heads.iter().map(|h| h.score).collect();
    let pred = tape.concat(&scores)?;
    let gold = tape.constant_vector(targets.iter().map(|t| t.score).collect());
    let main = mae_loss(tape, pred, gold)?;
    let mut total = tape.scale(main, config.main_weight);

    let polarity = if tasks.polarity {
        let probs: Vec<Var> = heads.iter().map(|h| h.polarity.expect("checked above")).collect();
        let p = tape.concat(&probs)?;
        let t = tape.constant_vector(targets.iter().map(|t| t.polarity).collect());
        let loss = bce_loss(tape, p, t)?;
        let w = tape.scale(loss, config.aux_weight);
        total = tape.add(total, w)?;
        Some(loss)
    } else {
        None
    };
    let intensity = if tasks.intensity {
        let probs: Vec<Var> = heads.iter().map(|h| h.intensity.expect("checked above")).collect();
        let t: Vec<[f64; 4]> = targets.iter().map(|t| t.intensity).collect();
        let loss = cce_loss(tape, &probs, &t)?;
        let w = tape.scale(loss, config.aux_weight);
        total = tape.add(total, w)?;
        Some(loss)
    } else {
        None
    };
    if let Some(r) = l2 {
        total = tape.add(total, r)?;
    }
    Ok(BatchLoss {
        total,
        main,
        polarity,
        intensity,
        l2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub main_weight: f64,
    pub aux_weight: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-MAE improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.0005,
            main_weight: 1.0,
            aux_weight: 0.5,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!("learning_rate {} must be > 0", self.learning_rate)));
        }
        if !(self.main_weight >= 0.0 && self.aux_weight >= 0.0) {
            return Err(Error::Config("loss weights must be >= 0".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("Adam needs beta1, beta2 in [0, 1) and epsilon > 0".into()));
        }
        Ok(())
    }
}

/// Adam moments for every tensor of one parameter set.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Adam {
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn from_config(params: &ParamSet, config: &TrainConfig) -> Self {
        Adam::new(params, config.beta1, config.beta2, config.epsilon)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. Unreachable parameters see a zero gradient.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients, lr: f64) -> Result<()> {
        let ids: Vec<_> = params.ids().collect();
        if ids.len() != self.m.len() {
            return Err(Error::dim("adam_step", &[ids.len()], &[self.m.len()]));
        }
        for &id in &ids {
            let n = params.get(id).len();
            if self.m[id.index()].len() != n {
                return Err(Error::dim("adam_step", &[n], &[self.m[id.index()].len()]));
            }
            if let Some(g) = grads.get(id) {
                if g.len() != n {
                    return Err(Error::dim("adam_step", &[n], &[g.len()]));
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for id in ids {
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let w = params.get_mut(id).data_mut();
            match grads.get(id) {
                Some(g) => {
                    for i in 0..w.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                        w[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
                None => {
                    for i in 0..w.len() {
                        if m[i] == 0.0 && v[i] == 0.0 {
                            continue;
                        }
                        m[i] *= b1;
                        v[i] *= b2;
                        w[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train: LossBreakdown,
    pub validation: LossBreakdown,
    pub validation_mae: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_mae: f64,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn write<W: std::io::Write>(&self, writer: W) -> Result<()> {
        crate::container::write_records(writer, HISTORY_KIND, &self.epochs)
    }
}

fn batch_loss(
    network: &Network,
    batch: &[&AlignedSegment],
    training: bool,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<Gradients>)> {
    let mut tape = Tape::new(network.params());
    let heads = network.forward_batch(&mut tape, batch, training, rng)?;
    let targets: Vec<TargetRecord> = batch.iter().map(|s| encode_targets(&s.labels)).collect();
    let l2 = network.l2_penalty(&mut tape)?;
    let loss = multi_task_loss(&mut tape, network.spec().tasks, &heads, &targets, l2, config)?;
    let breakdown = loss.breakdown(&tape);
    let grads = if want_grads { Some(tape.backward(loss.total)?) } else { None };
    Ok((breakdown, grads))
}

struct Averager {
    sum: LossBreakdown,
    weight: f64,
}

impl Averager {
    fn new(tasks: TaskSet) -> Self {
        Averager {
            sum: LossBreakdown {
                polarity: tasks.polarity.then_some(0.0),
                intensity: tasks.intensity.then_some(0.0),
                ..Default::default()
            },
            weight: 0.0,
        }
    }

    fn add(&mut self, b: &LossBreakdown, n: usize) {
        let w = n as f64;
        self.sum.main += w * b.main;
        self.sum.l2 += w * b.l2;
        self.sum.total += w * b.total;
        if let (Some(s), Some(v)) = (self.sum.polarity.as_mut(), b.polarity) {
            *s += w * v;
        }
        if let (Some(s), Some(v)) = (self.sum.intensity.as_mut(), b.intensity) {
            *s += w * v;
        }
        self.weight += w;
    }

    fn finish(self) -> LossBreakdown {
        let w = self.weight;
        LossBreakdown {
            main: self.sum.main / w,
            polarity: self.sum.polarity.map(|v| v / w),
            intensity: self.sum.intensity.map(|v| v / w),
            l2: self.sum.l2 / w,
            total: self.sum.total / w,
        }
    }
}

/// Evaluation-mode loss breakdown over a fold, batch by batch.
pub fn evaluate_loss(network: &Network, segments: &[AlignedSegment], config: &TrainConfig) -> Result<LossBreakdown> {
    if segments.is_empty() {
        return Err(Error::Contract("cannot evaluate an empty fold".into()));
    }
    let refs: Vec<&AlignedSegment> = segments.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut avg = Averager::new(network.spec().tasks);
    for chunk in refs.chunks(config.batch_size) {
        let (b, _) = batch_loss(network, chunk, false, config, &mut rng, false)?;
        avg.add(&b, chunk.len());
    }
    Ok(avg.finish())
}

/// Train with early stopping on validation MAE and restore the best parameters.
pub fn train(
    network: &mut Network,
    train_set: &[AlignedSegment],
    validation: &[AlignedSegment],
    config: &TrainConfig,
) -> Result<TrainingHistory> {
    train_observed(network, train_set, validation, config, &mut |_| {})
}

/// [`train`], calling `observer` after every epoch.
pub fn train_observed(
    network: &mut Network,
    train_set: &[AlignedSegment],
    validation: &[AlignedSegment],
    config: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainingHistory> {
    config.validate()?;
    if train_set.is_empty() || validation.is_empty() {
        return Err(Error::Contract("training needs non-empty train and validation folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::from_config(network.params(), config);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(usize, f64, ParamSet)> = None;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut avg = Averager::new(network.spec().tasks);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&AlignedSegment> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (b, grads) = batch_loss(network, &batch, true, config, &mut rng, true)?;
            let grads = grads.expect("training batches return gradients");
            adam.step(network.params_mut(), &grads, config.learning_rate)?;
            avg.add(&b, batch.len());
        }
        let val = evaluate_loss(network, validation, config)?;
        let improved = best.as_ref().is_none_or(|(_, m, _)| val.main < *m);
        if improved {
            best = Some((epoch, val.main, network.params().clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        let record = EpochRecord {
            epoch,
            train: avg.finish(),
            validation_mae: val.main,
            validation: val,
            improved,
        };
        observer(&record);
        epochs.push(record);
        if since_best >= config.patience {
            stopped_early = epoch < config.max_epochs;
            break;
        }
    }

    let (best_epoch, best_validation_mae, params) = best.expect("at least one epoch ran");
    network.params_mut().copy_values_from(&params)?;
    Ok(TrainingHistory {
        epochs,
        best_epoch,
        best_validation_mae,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_check, Coordinates, Tensor};
    use crate::data::{align_all, generate_synthetic, SyntheticConfig};
    use crate::labels::LabelBundle;
    use crate::models::{build_model, ModelKind, ModelSpec};
    use rand::Rng;

    fn one_param(value: Vec<f64>) -> (ParamSet, crate::autodiff::ParamId) {
        let mut p = ParamSet::new();
        let n = value.len();
        let id = p.insert("x", Tensor::new(vec![n], value).unwrap()).unwrap();
        (p, id)
    }

    #[test]
    fn mae_examples() {
        let (p, _) = one_param(vec![0.0]);
        let mut t = Tape::new(&p);
        let a = t.constant_vector(vec![1.0, -1.0]);
        let z = t.constant_vector(vec![0.0, 0.0]);
        let l = mae_loss(&mut t, a, z).unwrap();
        assert_eq!(t.scalar(l), 1.0);
        let l = mae_loss(&mut t, a, a).unwrap();
        assert_eq!(t.scalar(l), 0.0);
        let short = t.constant_vector(vec![0.0]);
        assert!(matches!(mae_loss(&mut t, a, short), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mae_gradient_and_tie_subgradient() {
        let (p, id) = one_param(vec![0.3, -1.2, 2.0]);
        let target = vec![0.1, 0.4, -0.5];
        let r = finite_difference_check(&p, 1e-6, &Coordinates::All, |t| {
            let x = t.param(id);
            let y = t.constant_vector(target.clone());
            mae_loss(t, x, y)
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");

        let (p, id) = one_param(vec![0.5]);
        let mut t = Tape::new(&p);
        let x = t.param(id);
        let y = t.constant_vector(vec![0.5]);
        let l = mae_loss(&mut t, x, y).unwrap();
        assert_eq!(t.backward(l).unwrap().get(id).unwrap(), &[0.0]);
    }

    #[test]
    fn bce_examples() {
        let (p, id) = one_param(vec![0.0]);
        let mut t = Tape::new(&p);
        let one = t.constant_vector(vec![1.0]);
        let zero = t.constant_vector(vec![0.0]);
        let sure = t.constant_vector(vec![1.0]);
        let l = bce_loss(&mut t, sure, one).unwrap();
        assert!(t.scalar(l) < 1e-11);
        let half = t.constant_vector(vec![0.5]);
        for target in [one, zero] {
            let l = bce_loss(&mut t, half, target).unwrap();
            assert!((t.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);
        }
        let bad = t.constant_vector(vec![0.5]);
        assert!(bce_loss(&mut t, half, bad).is_err());

        let w = t.param(id);
        let s = t.sigmoid(w);
        let l = bce_loss(&mut t, s, one).unwrap();
        let g = t.backward(l).unwrap();
        assert!((g.get(id).unwrap()[0] + 0.5).abs() < 1e-12);
        let r = finite_difference_check(&p, 1e-6, &Coordinates::All, |t| {
            let w = t.param(id);
            let s = t.sigmoid(w);
            let one = t.constant_vector(vec![1.0]);
            bce_loss(t, s, one)
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-8);
    }

    #[test]
    fn cce_examples() {
        let (p, id) = one_param(vec![0.2, -0.4, 1.1, 0.0]);
        let mut t = Tape::new(&p);
        let sure = t.constant_vector(vec![1.0, 0.0, 0.0, 0.0]);
        let l = cce_loss(&mut t, &[sure], &[[1.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(t.scalar(l).abs() < 1e-15);
        let uniform = t.constant_vector(vec![0.25; 4]);
        let l = cce_loss(&mut t, &[uniform], &[[0.0, 0.0, 1.0, 0.0]]).unwrap();
        assert!((t.scalar(l) - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(
            cce_loss(&mut t, &[uniform], &[[0.5, 0.5, 0.0, 0.0]]),
            Err(Error::Contract(_))
        ));
        assert!(cce_loss(&mut t, &[uniform], &[[1.0, 0.0, 0.0, 1.0]]).is_err());

        let r = finite_difference_check(&p, 1e-6, &Coordinates::All, |t| {
            let x = t.param(id);
            let q = t.softmax(x)?;
            cce_loss(t, &[q], &[[0.0, 1.0, 0.0, 0.0]])
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    fn fake_heads(tape: &mut Tape<'_>, tasks: TaskSet, n: usize, rng: &mut ChaCha8Rng) -> Vec<HeadVars> {
        (0..n)
            .map(|_| {
                let score = tape.constant_vector(vec![rng.gen_range(-3.0..3.0)]);
                let polarity = tasks.polarity.then(|| tape.constant_vector(vec![rng.gen_range(0.01..0.99)]));
                let intensity = tasks.intensity.then(|| {
                    let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    tape.constant_vector(crate::autodiff::softmax(&raw))
                });
                HeadVars {
                    score,
                    polarity,
                    intensity,
                }
            })
            .collect()
    }

    #[test]
    fn weighted_sum_examples() {
        let c = TrainConfig::default();
        assert!((combine_losses(0.4, Some(0.6), Some(1.0), 0.0, &c) - 1.2).abs() < 1e-15);
        assert_eq!(combine_losses(0.7, None, None, 0.25, &c), 0.95);
    }

    #[test]
    fn logged_total_matches_recomputed_sum() {
        let (p, _) = one_param(vec![0.0]);
        let config = TrainConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for tasks in TaskSet::GRID {
            for _ in 0..25 {
                let mut tape = Tape::new(&p);
                let n = rng.gen_range(1..8);
                let heads = fake_heads(&mut tape, tasks, n, &mut rng);
                let targets: Vec<TargetRecord> = (0..n)
                    .map(|_| encode_targets(&LabelBundle::from_score(rng.gen_range(-3.0..3.0)).unwrap()))
                    .collect();
                let l2 = tape.constant_vector(vec![rng.gen_range(0.0..0.1)]);
                let loss = multi_task_loss(&mut tape, tasks, &heads, &targets, Some(l2), &config).unwrap();
                let b = loss.breakdown(&tape);
                let again = combine_losses(b.main, b.polarity, b.intensity, b.l2, &config);
                assert!((b.total - again).abs() <= 1e-12);
                assert_eq!(b.polarity.is_some(), tasks.polarity);
            }
        }
    }

    #[test]
    fn task_set_mismatch_is_rejected() {
        let (p, _) = one_param(vec![0.0]);
        let mut tape = Tape::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let heads = fake_heads(&mut tape, TaskSet::SP, 2, &mut rng);
        let targets = vec![encode_targets(&LabelBundle::from_score(1.0).unwrap()); 2];
        let c = TrainConfig::default();
        assert!(matches!(
            multi_task_loss(&mut tape, TaskSet::S, &heads, &targets, None, &c),
            Err(Error::Contract(_))
        ));
        assert!(multi_task_loss(&mut tape, TaskSet::SP, &heads, &targets[..1], None, &c).is_err());
    }

    #[test]
    fn adam_zero_gradient_and_first_step() {
        let (mut p, id) = one_param(vec![0.5, -2.0, 3.0]);
        let before = p.clone();
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-8);
        adam.step(&mut p, &Gradients::default(), 0.01).unwrap();
        assert_eq!(p, before);
        let mut tape = Tape::new(&p);
        let zero = {
            let x = tape.param(id);
            let s = tape.scale(x, 0.0);
            let s = tape.sum(s);
            tape.backward(s).unwrap()
        };
        adam.step(&mut p, &zero, 0.01).unwrap();
        assert_eq!(p, before);

        let lr = 0.0005;
        let grads = {
            let mut tape = Tape::new(&p);
            let x = tape.param(id);
            let s = tape.scale(x, 7.5);
            let s = tape.sum(s);
            tape.backward(s).unwrap()
        };
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-8);
        adam.step(&mut p, &grads, lr).unwrap();
        assert_eq!(adam.steps(), 1);
        for (a, b) in p.get(id).data().iter().zip(before.get(id).data()) {
            let d = (a - b).abs();
            assert!(d <= lr * (1.0 + 1e-6) && d > lr * 0.99);
        }
        let (other, _) = one_param(vec![0.0]);
        assert!(Adam::new(&other, 0.9, 0.999, 1e-8).step(&mut p, &grads, lr).is_err());
    }

    #[test]
    fn adam_descends_a_parabola() {
        let (mut p, id) = one_param(vec![1.0]);
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-8);
        let mut last = 1.0f64;
        for _ in 0..1000 {
            let grads = {
                let mut t = Tape::new(&p);
                let x = t.param(id);
                let l = t.sum_squares(x);
                t.backward(l).unwrap()
            };
            adam.step(&mut p, &grads, 0.0005).unwrap();
            let x = p.get(id).data()[0];
            assert!(x.abs() <= last.abs());
            last = x;
        }
        assert!(last.abs() < 0.9, "{last}");
    }

    #[test]
    fn adam_is_scale_invariant_with_constant_gradients() {
        let run = |scale: f64| {
            let (mut p, id) = one_param(vec![0.0, 0.0]);
            let mut adam = Adam::new(&p, 0.9, 0.999, 1e-8);
            for _ in 0..50 {
                let g = Gradients {
                    grads: vec![Some(vec![scale * 0.3, -scale * 2.0])],
                };
                adam.step(&mut p, &g, 0.001).unwrap();
            }
            let _ = id;
            p.get(id).data().to_vec()
        };
        let (a, b) = (run(1.0), run(1000.0));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8);
            assert!(x.abs() <= 50.0 * 0.001 * (1.0 + 1e-6));
        }
    }

    fn tiny_folds(seed: u64) -> (Vec<AlignedSegment>, Vec<AlignedSegment>) {
        let cfg = SyntheticConfig {
            n_segments: 24,
            max_words: 4,
            vocal_rate_hz: 20.0,
            visual_rate_hz: 10.0,
            ..Default::default()
        };
        let (mut segs, _) = align_all(&generate_synthetic(&cfg, seed).unwrap()).unwrap();
        let val = segs.split_off(16);
        (segs, val)
    }

    #[test]
    fn one_epoch_and_determinism() {
        let (train_set, val) = tiny_folds(1);
        let spec = ModelSpec::new(ModelKind::Lf, TaskSet::ALL);
        let config = TrainConfig {
            max_epochs: 1,
            batch_size: 8,
            ..Default::default()
        };
        let mut net = build_model(&spec, 2).unwrap();
        let h = train(&mut net, &train_set, &val, &config).unwrap();
        assert_eq!(h.epochs.len(), 1);
        assert!(h.epochs[0].train.polarity.is_some());

        let config = TrainConfig {
            max_epochs: 3,
            ..config
        };
        let mut a = build_model(&spec, 2).unwrap();
        let mut b = build_model(&spec, 2).unwrap();
        let ha = train(&mut a, &train_set, &val, &config).unwrap();
        let hb = train(&mut b, &train_set, &val, &config).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.params(), b.params());
        assert!(train(&mut a, &[], &val, &config).is_err());
        assert!(train(&mut a, &train_set, &[], &config).is_err());
    }

    #[test]
    fn early_stopping_restores_best_parameters() {
        let (train_set, val) = tiny_folds(4);
        let spec = ModelSpec::new(ModelKind::Vocal, TaskSet::S);
        let config = TrainConfig {
            max_epochs: 40,
            patience: 2,
            batch_size: 4,
            learning_rate: 0.05,
            ..Default::default()
        };
        let mut net = build_model(&spec, 5).unwrap();
        let h = train(&mut net, &train_set, &val, &config).unwrap();
        let min = h.epochs.iter().map(|e| e.validation_mae).fold(f64::INFINITY, f64::min);
        assert_eq!(h.best_validation_mae, min);
        assert_eq!(h.epochs[h.best_epoch - 1].validation_mae, min);
        let now = evaluate_loss(&net, &val, &config).unwrap().main;
        assert!((now - min).abs() < 1e-12);
        let tail = h.epochs.len() - h.best_epoch;
        assert!(tail <= config.patience);
        for r in &h.epochs {
            let t = &r.train;
            assert!((t.total - combine_losses(t.main, t.polarity, t.intensity, t.l2, &config)).abs() < 1e-9);
        }
    }

    #[test]
    fn verbal_model_beats_predict_zero() {
        let cfg = SyntheticConfig {
            n_segments: 120,
            max_words: 5,
            vocal_rate_hz: 10.0,
            visual_rate_hz: 10.0,
            ..Default::default()
        };
        let (mut segs, _) = align_all(&generate_synthetic(&cfg, 8).unwrap()).unwrap();
        let val = segs.split_off(90);
        let baseline = val.iter().map(|s| s.labels.score.abs()).sum::<f64>() / val.len() as f64;
        let mut net = build_model(&ModelSpec::new(ModelKind::Verbal, TaskSet::S), 9).unwrap();
        let config = TrainConfig {
            max_epochs: 15,
            learning_rate: 0.005,
            ..Default::default()
        };
        let h = train(&mut net, &segs, &val, &config).unwrap();
        assert!(h.best_validation_mae < baseline, "{} vs {baseline}", h.best_validation_mae);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                aux_weight: -0.5,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                beta2: 1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
        let json = r#"{"learning_rate": 0.001, "seed": 4}"#;
        let c: TrainConfig = serde_json::from_str(json).unwrap();
        assert_eq!((c.learning_rate, c.seed, c.batch_size), (0.001, 4, 32));
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr": 1}"#).is_err());
    }
}
