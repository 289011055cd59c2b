use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{ModelKind, ModelSpec};
use crate::autodiff::{ParamSet, Tape, Var};
use crate::checkpoint;
use crate::data::{pool_segment, AlignedSegment, VERBAL_DIM, VISUAL_DIM, VOCAL_DIM};
use crate::error::{Error, Result};
use crate::layers::{Activation, DenseLayer, DropoutSpec, LstmLayer};

/// Predictions for one segment. Auxiliary fields are present exactly when
/// the model has the matching head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskOutput {
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<[f64; 4]>,
}

/// Head outputs as tape nodes.
#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    pub score: Var,
    pub polarity: Option<Var>,
    pub intensity: Option<Var>,
}

/// Vocal/visual stack: input dropout on the raw features, then ReLU layers.
/// An optional conditioning vector (HF) is prepended after dropout.
#[derive(Clone, Debug)]
struct DenseSubnet {
    dropout: DropoutSpec,
    layers: Vec<DenseLayer>,
}

impl DenseSubnet {
    fn new(params: &mut ParamSet, path: &str, input: usize, spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Self> {
        let h = &spec.hyper;
        let mut layers = Vec::with_capacity(h.dense_layers);
        let mut width = input;
        for i in 0..h.dense_layers {
            layers.push(DenseLayer::new(
                params,
                &format!("{path}.dense{i}"),
                width,
                h.dense_units,
                Activation::Relu,
                0.0,
                rng,
            )?);
            width = h.dense_units;
        }
        Ok(DenseSubnet {
            dropout: DropoutSpec::new(h.dropout)?,
            layers,
        })
    }

    fn forward(
        &self,
        tape: &mut Tape<'_>,
        raw: Var,
        condition: Option<Var>,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<(Var, Var)> {
        let x = self.dropout.forward(tape, raw, training, rng)?;
        let input = match condition {
            Some(c) => tape.concat(&[c, x])?,
            None => x,
        };
        let mut h = input;
        for l in &self.layers {
            h = l.forward(tape, h)?;
        }
        Ok((h, input))
    }
}

/// LSTM over word embeddings followed by one ReLU layer.
#[derive(Clone, Debug)]
struct VerbalSubnet {
    lstm: LstmLayer,
    dense: DenseLayer,
}

impl VerbalSubnet {
    fn new(params: &mut ParamSet, path: &str, input: usize, spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Self> {
        let h = &spec.hyper;
        let lstm = LstmLayer::new(params, &format!("{path}.lstm"), input, h.lstm_units, rng)?;
        let dense = DenseLayer::new(
            params,
            &format!("{path}.dense"),
            h.lstm_units,
            h.verbal_dense_units,
            Activation::Relu,
            0.0,
            rng,
        )?;
        Ok(VerbalSubnet { lstm, dense })
    }

    fn forward(&self, tape: &mut Tape<'_>, steps: &[Var]) -> Result<Var> {
        let h = self.lstm.forward(tape, steps)?;
        self.dense.forward(tape, h)
    }
}

/// The stack shared by every fusion model: LSTM, then L2-regularized ReLU layers.
#[derive(Clone, Debug)]
struct FusionStack {
    lstm: LstmLayer,
    dense: Vec<DenseLayer>,
}

impl FusionStack {
    fn new(params: &mut ParamSet, input: usize, spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Self> {
        let h = &spec.hyper;
        let lstm = LstmLayer::new(params, "fusion.lstm", input, h.lstm_units, rng)?;
        let mut dense = Vec::with_capacity(h.dense_layers);
        let mut width = h.lstm_units;
        for i in 0..h.dense_layers {
            dense.push(DenseLayer::new(
                params,
                &format!("fusion.dense{i}"),
                width,
                h.dense_units,
                Activation::Relu,
                h.fusion_l2,
                rng,
            )?);
            width = h.dense_units;
        }
        Ok(FusionStack { lstm, dense })
    }

    #[cfg(test)]
    fn forward(&self, tape: &mut Tape<'_>, steps: &[Var]) -> Result<Var> {
        let mut h = self.lstm.forward(tape, steps)?;
        for l in &self.dense {
            h = l.forward(tape, h)?;
        }
        Ok(h)
    }

    fn l2_terms(&self, tape: &mut Tape<'_>, out: &mut Vec<Var>) {
        out.extend(self.dense.iter().filter_map(|l| l.l2_penalty(tape)));
    }
}

#[derive(Clone, Debug)]
struct Heads {
    score: DenseLayer,
    polarity: Option<DenseLayer>,
    intensity: Option<DenseLayer>,
    score_scale: f64,
}

impl Heads {
    fn new(params: &mut ParamSet, top: usize, spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Self> {
        let score = DenseLayer::new(params, "head.score", top, 1, Activation::Tanh, 0.0, rng)?;
        let polarity = if spec.tasks.polarity {
            Some(DenseLayer::new(params, "head.polarity", top, 1, Activation::Sigmoid, 0.0, rng)?)
        } else {
            None
        };
        let intensity = if spec.tasks.intensity {
            Some(DenseLayer::new(params, "head.intensity", top, 4, Activation::Softmax, 0.0, rng)?)
        } else {
            None
        };
        Ok(Heads {
            score,
            polarity,
            intensity,
            score_scale: spec.hyper.score_scale,
        })
    }

    fn forward(&self, tape: &mut Tape<'_>, top: Var) -> Result<HeadVars> {
        let s = self.score.forward(tape, top)?;
        let score = tape.scale(s, self.score_scale);
        let polarity = self.polarity.as_ref().map(|h| h.forward(tape, top)).transpose()?;
        let intensity = self.intensity.as_ref().map(|h| h.forward(tape, top)).transpose()?;
        Ok(HeadVars {
            score,
            polarity,
            intensity,
        })
    }
}

#[derive(Clone, Debug)]
enum Body {
    Vocal(DenseSubnet),
    Visual(DenseSubnet),
    Verbal(VerbalSubnet),
    Ef {
        dropout: DropoutSpec,
        fusion: FusionStack,
    },
    /// TFN, LF and HF: three unimodal subnets feeding the fusion stack.
    Composite {
        vocal: DenseSubnet,
        visual: DenseSubnet,
        verbal: VerbalSubnet,
        fusion: FusionStack,
    },
}

/// Intermediate nodes of one forward pass.
pub(crate) struct BodyOut {
    pub top: Var,
    /// Sequence fed to the fusion stack (fusion kinds only).
    pub fusion_steps: Vec<Var>,
    /// HF: input to the visual subnet.
    pub hf_visual_input: Option<Var>,
    /// HF: per-word inputs to the verbal LSTM.
    pub hf_verbal_steps: Vec<Var>,
}

/// A parameterized network for one [`ModelSpec`].
#[derive(Clone, Debug)]
pub struct Network {
    spec: ModelSpec,
    params: ParamSet,
    body: Body,
    heads: Heads,
}

/// Build the network for `spec` with Glorot-initialized weights from `seed`.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let h = &spec.hyper;
    let ef_width = VOCAL_DIM + VISUAL_DIM + VERBAL_DIM;
    let (body, top) = match spec.kind {
        ModelKind::Vocal => (
            Body::Vocal(DenseSubnet::new(&mut params, "vocal", VOCAL_DIM, spec, &mut rng)?),
            h.dense_units,
        ),
        ModelKind::Visual => (
            Body::Visual(DenseSubnet::new(&mut params, "visual", VISUAL_DIM, spec, &mut rng)?),
            h.dense_units,
        ),
        ModelKind::Verbal => (
            Body::Verbal(VerbalSubnet::new(&mut params, "verbal", VERBAL_DIM, spec, &mut rng)?),
            h.verbal_dense_units,
        ),
        ModelKind::Ef => (
            Body::Ef {
                dropout: DropoutSpec::new(h.dropout)?,
                fusion: FusionStack::new(&mut params, ef_width, spec, &mut rng)?,
            },
            h.dense_units,
        ),
        kind @ (ModelKind::Tfn | ModelKind::Lf | ModelKind::Hf) => {
            let hf = kind == ModelKind::Hf;
            let vocal = DenseSubnet::new(&mut params, "vocal", VOCAL_DIM, spec, &mut rng)?;
            let visual_in = if hf { h.dense_units + VISUAL_DIM } else { VISUAL_DIM };
            let visual = DenseSubnet::new(&mut params, "visual", visual_in, spec, &mut rng)?;
            let verbal_in = if hf { h.dense_units + VERBAL_DIM } else { VERBAL_DIM };
            let verbal = VerbalSubnet::new(&mut params, "verbal", verbal_in, spec, &mut rng)?;
            let fused = match kind {
                ModelKind::Tfn => h.dense_units * h.dense_units * h.verbal_dense_units,
                ModelKind::Lf => 2 * h.dense_units + h.verbal_dense_units,
                _ => h.verbal_dense_units,
            };
            let fusion = FusionStack::new(&mut params, fused, spec, &mut rng)?;
            (
                Body::Composite {
                    vocal,
                    visual,
                    verbal,
                    fusion,
                },
                h.dense_units,
            )
        }
    };
    let heads = Heads::new(&mut params, top, spec, &mut rng)?;
    Ok(Network {
        spec: spec.clone(),
        params,
        body,
        heads,
    })
}

impl Network {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Rebuild the topology for `spec` and adopt `params`, which must match
    /// its layout exactly.
    pub fn from_params(spec: &ModelSpec, params: ParamSet) -> Result<Network> {
        let mut net = build_model(spec, 0)?;
        net.params
            .copy_values_from(&params)
            .map_err(|e| Error::Checkpoint(format!("parameters do not fit {}: {e}", spec.label())))?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::to_string(&self.spec)?;
        checkpoint::save(path, &meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Network> {
        let (meta, params) = checkpoint::load(path)?;
        let spec: ModelSpec =
            serde_json::from_str(&meta).map_err(|e| Error::Checkpoint(format!("bad model spec: {e}")))?;
        Network::from_params(&spec, params)
    }

    /// Everything up to the fusion stack; `top` is final only for unimodal kinds.
    fn encode(
        &self,
        tape: &mut Tape<'_>,
        seg: &AlignedSegment,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<BodyOut> {
        if seg.is_empty() || seg.vocal.len() != seg.len() || seg.visual.len() != seg.len() {
            return Err(Error::Contract(format!(
                "segment {}: modality matrices must share a non-zero word count",
                seg.key
            )));
        }
        let mut fusion_steps = Vec::new();
        let mut hf_visual_input = None;
        let mut hf_verbal_steps = Vec::new();
        let pooled = |tape: &mut Tape<'_>, rows: &[Vec<f64>]| -> Result<Var> { Ok(tape.constant_vector(pool_segment(rows)?)) };
        let top = match &self.body {
            Body::Vocal(net) => {
                let x = pooled(tape, &seg.vocal)?;
                Some(net.forward(tape, x, None, training, rng)?.0)
            }
            Body::Visual(net) => {
                let x = pooled(tape, &seg.visual)?;
                Some(net.forward(tape, x, None, training, rng)?.0)
            }
            Body::Verbal(net) => {
                let steps: Vec<Var> = seg.verbal.iter().map(|r| tape.constant_vector(r.clone())).collect();
                Some(net.forward(tape, &steps)?)
            }
            Body::Ef { dropout, .. } => {
                let mut steps = Vec::with_capacity(seg.len());
                for row in fuse_ef(seg) {
                    let x = tape.constant_vector(row);
                    steps.push(dropout.forward(tape, x, training, rng)?);
                }
                fusion_steps = steps;
                None
            }
            Body::Composite {
                vocal,
                visual,
                verbal,
                ..
            } => {
                let va = pooled(tape, &seg.vocal)?;
                let vi = pooled(tape, &seg.visual)?;
                let (vocal_top, _) = vocal.forward(tape, va, None, training, rng)?;
                let fused = match self.spec.kind {
                    ModelKind::Hf => {
                        let (visual_top, visual_input) = visual.forward(tape, vi, Some(vocal_top), training, rng)?;
                        hf_visual_input = Some(visual_input);
                        let mut steps = Vec::with_capacity(seg.len());
                        for r in &seg.verbal {
                            let w = tape.constant_vector(r.clone());
                            steps.push(tape.concat(&[visual_top, w])?);
                        }
                        hf_verbal_steps = steps.clone();
                        verbal.forward(tape, &steps)?
                    }
                    kind => {
                        let (visual_top, _) = visual.forward(tape, vi, None, training, rng)?;
                        let steps: Vec<Var> = seg.verbal.iter().map(|r| tape.constant_vector(r.clone())).collect();
                        let verbal_top = verbal.forward(tape, &steps)?;
                        if kind == ModelKind::Tfn {
                            let ab = tape.outer(vocal_top, visual_top)?;
                            tape.outer(ab, verbal_top)?
                        } else {
                            tape.concat(&[vocal_top, visual_top, verbal_top])?
                        }
                    }
                };
                // Flat fused vectors go through the sequence stack as one step.
                fusion_steps = vec![fused];
                None
            }
        };
        let top = match top {
            Some(t) => t,
            None => fusion_steps[0],
        };
        Ok(BodyOut {
            top,
            fusion_steps,
            hf_visual_input,
            hf_verbal_steps,
        })
    }

    fn fusion_stack(&self) -> Option<&FusionStack> {
        match &self.body {
            Body::Ef { fusion, .. } | Body::Composite { fusion, .. } => Some(fusion),
            _ => None,
        }
    }

    /// Forward passes for several segments. The fusion input projection runs
    /// as one matrix product across the batch so large weights stream once.
    pub(crate) fn body_forward_batch(
        &self,
        tape: &mut Tape<'_>,
        segs: &[&AlignedSegment],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<BodyOut>> {
        let mut outs = segs
            .iter()
            .map(|seg| self.encode(tape, seg, training, rng))
            .collect::<Result<Vec<_>>>()?;
        let Some(fusion) = self.fusion_stack() else {
            return Ok(outs);
        };
        if outs.is_empty() {
            return Ok(outs);
        }
        let all: Vec<Var> = outs.iter().flat_map(|o| o.fusion_steps.iter().copied()).collect();
        let projected = fusion.lstm.project(tape, &all)?;
        let mut at = 0;
        for o in &mut outs {
            let n = o.fusion_steps.len();
            let mut h = fusion.lstm.forward_projected(tape, &projected[at..at + n])?;
            at += n;
            for l in &fusion.dense {
                h = l.forward(tape, h)?;
            }
            o.top = h;
        }
        Ok(outs)
    }

    pub(crate) fn body_forward(
        &self,
        tape: &mut Tape<'_>,
        seg: &AlignedSegment,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<BodyOut> {
        let mut v = self.body_forward_batch(tape, &[seg], training, rng)?;
        Ok(v.remove(0))
    }

    /// Heads for every segment of a batch, in order.
    pub fn forward_batch(
        &self,
        tape: &mut Tape<'_>,
        segs: &[&AlignedSegment],
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<HeadVars>> {
        self.body_forward_batch(tape, segs, training, rng)?
            .into_iter()
            .map(|b| self.heads.forward(tape, b.top))
            .collect()
    }

    /// Record a forward pass and return the head nodes.
    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        seg: &AlignedSegment,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<HeadVars> {
        let body = self.body_forward(tape, seg, training, rng)?;
        self.heads.forward(tape, body.top)
    }

    /// Sum of all L2 terms, or `None` when no layer is regularized.
    pub fn l2_penalty(&self, tape: &mut Tape<'_>) -> Result<Option<Var>> {
        let mut terms = Vec::new();
        if let Some(fusion) = self.fusion_stack() {
            fusion.l2_terms(tape, &mut terms);
        }
        let Some((&first, rest)) = terms.split_first() else {
            return Ok(None);
        };
        let mut total = first;
        for &t in rest {
            total = tape.add(total, t)?;
        }
        Ok(Some(total))
    }

    pub fn read_outputs(tape: &Tape<'_>, heads: &HeadVars) -> MultiTaskOutput {
        MultiTaskOutput {
            score: tape.scalar(heads.score),
            polarity: heads.polarity.map(|v| tape.scalar(v)),
            intensity: heads.intensity.map(|v| {
                let p = tape.value(v);
                [p[0], p[1], p[2], p[3]]
            }),
        }
    }

    /// Evaluation-mode prediction (no dropout).
    pub fn predict(&self, seg: &AlignedSegment) -> Result<MultiTaskOutput> {
        let mut tape = Tape::new(&self.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let heads = self.forward(&mut tape, seg, false, &mut rng)?;
        Ok(Network::read_outputs(&tape, &heads))
    }

    pub fn predict_all(&self, segs: &[AlignedSegment]) -> Result<Vec<MultiTaskOutput>> {
        segs.iter().map(|s| self.predict(s)).collect()
    }

    /// Evaluation-mode sequence fed to the fusion stack, row per step.
    pub fn fused_input(&self, seg: &AlignedSegment) -> Result<Vec<Vec<f64>>> {
        if !self.spec.kind.is_fusion() {
            return Err(Error::Spec(format!("{} is not a fusion model", self.spec.kind)));
        }
        let mut tape = Tape::new(&self.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.body_forward(&mut tape, seg, false, &mut rng)?;
        Ok(out.fusion_steps.iter().map(|&v| tape.value(v).to_vec()).collect())
    }
}

/// Stage inputs of a hierarchical-fusion forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct HfTrace {
    /// `[vocal_top | pooled visual]`.
    pub visual_input: Vec<f64>,
    /// Per word: `[visual_top | embedding]`.
    pub verbal_inputs: Vec<Vec<f64>>,
    /// Verbal subnet top, the input to the fusion stack.
    pub fused: Vec<f64>,
}

/// Evaluation-mode hierarchical fusion of one segment.
pub fn fuse_hf(network: &Network, seg: &AlignedSegment) -> Result<HfTrace> {
    if network.spec.kind != ModelKind::Hf {
        return Err(Error::Spec(format!("fuse_hf needs an HF network, got {}", network.spec.kind)));
    }
    let mut tape = Tape::new(&network.params);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = network.body_forward(&mut tape, seg, false, &mut rng)?;
    Ok(HfTrace {
        visual_input: tape.value(out.hf_visual_input.expect("HF records its visual input")).to_vec(),
        verbal_inputs: out.hf_verbal_steps.iter().map(|&v| tape.value(v).to_vec()).collect(),
        fused: tape.value(out.fusion_steps[0]).to_vec(),
    })
}

/// Per-word `[vocal | visual | verbal]` rows.
pub fn fuse_ef(seg: &AlignedSegment) -> Vec<Vec<f64>> {
    (0..seg.len())
        .map(|i| {
            let mut row = Vec::with_capacity(VOCAL_DIM + VISUAL_DIM + VERBAL_DIM);
            row.extend_from_slice(&seg.vocal[i]);
            row.extend_from_slice(&seg.visual[i]);
            row.extend_from_slice(&seg.verbal[i]);
            row
        })
        .collect()
}

fn check_tops(op: &'static str, vocal: &[f64], visual: &[f64], verbal: &[f64]) -> Result<()> {
    let h = super::Hyperparameters::default();
    let expected = [h.dense_units, h.dense_units, h.verbal_dense_units];
    let found = [vocal.len(), visual.len(), verbal.len()];
    if found != expected {
        return Err(Error::dim(op, &found, &expected));
    }
    Ok(())
}

/// Flattened `vocal ⊗ visual ⊗ verbal`; entry `(i, j, k)` sits at
/// `(i·32 + j)·64 + k`. No constant-1 dimension is appended.
pub fn fuse_tfn(vocal_top: &[f64], visual_top: &[f64], verbal_top: &[f64]) -> Result<Vec<f64>> {
    check_tops("fuse_tfn", vocal_top, visual_top, verbal_top)?;
    let mut out = Vec::with_capacity(vocal_top.len() * visual_top.len() * verbal_top.len());
    for &a in vocal_top {
        for &b in visual_top {
            out.extend(verbal_top.iter().map(|&c| a * b * c));
        }
    }
    Ok(out)
}

/// `[vocal_top | visual_top | verbal_top]`.
pub fn fuse_lf(vocal_top: &[f64], visual_top: &[f64], verbal_top: &[f64]) -> Result<Vec<f64>> {
    check_tops("fuse_lf", vocal_top, visual_top, verbal_top)?;
    Ok([vocal_top, visual_top, verbal_top].concat())
}

#[cfg(test)]
pub(crate) fn heads_forward(network: &Network, tape: &mut Tape<'_>, top: Var) -> Result<HeadVars> {
    network.heads.forward(tape, top)
}

#[cfg(test)]
pub(crate) fn fusion_forward(network: &Network, tape: &mut Tape<'_>, steps: &[Var]) -> Result<Var> {
    match &network.body {
        Body::Ef { fusion, .. } | Body::Composite { fusion, .. } => fusion.forward(tape, steps),
        _ => Err(Error::Spec(format!("{} has no fusion stack", network.spec.kind))),
    }
}
