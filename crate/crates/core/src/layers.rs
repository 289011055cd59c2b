//! Dense, LSTM and dropout layers with Glorot initialization.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::{build_model, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
    Linear,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        Ok(match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Softmax => tape.softmax(x)?,
            Activation::Linear => x,
        })
    }
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot_uniform(rng: &mut dyn RngCore, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let bound = glorot_bound(fan_in, fan_out);
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    pub l2_weight: f64,
}

impl DenseLayer {
    /// Register `{path}.weight` (`input×output`, Glorot uniform) and
    /// `{path}.bias` (zeros).
    pub fn new(
        params: &mut ParamSet,
        path: &str,
        input: usize,
        output: usize,
        activation: Activation,
        l2_weight: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if l2_weight < 0.0 {
            return Err(Error::Contract(format!("{path}: negative l2 weight {l2_weight}")));
        }
        let w = glorot_uniform(rng, input, output, input * output);
        let weight = params.insert(format!("{path}.weight"), Tensor::matrix(input, output, w)?)?;
        let bias = params.insert(format!("{path}.bias"), Tensor::zeros(vec![output]))?;
        Ok(DenseLayer {
            weight,
            bias,
            input,
            output,
            activation,
            l2_weight,
        })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let last = tape.shape(x).last().copied();
        if last != Some(self.input) {
            return Err(Error::dim("dense", tape.shape(x), &[self.input, self.output]));
        }
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let h = tape.matmul(x, w)?;
        let h = tape.add(h, b)?;
        self.activation.apply(tape, h)
    }

    /// `l2_weight · Σ w²` over the weight matrix, or `None` when the weight is 0.
    pub fn l2_penalty(&self, tape: &mut Tape<'_>) -> Option<Var> {
        if self.l2_weight == 0.0 {
            return None;
        }
        let w = tape.param(self.weight);
        let sq = tape.sum_squares(w);
        Some(tape.scale(sq, self.l2_weight))
    }
}

/// Single-layer LSTM returning the final hidden state.
///
/// Gate blocks are stored side by side in one `[in × 4h]` input matrix, one
/// `[h × 4h]` recurrent matrix and one `[4h]` bias, in the order
/// input, forget, cell, output. The forget block of the bias starts at 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub w_input: ParamId,
    pub w_recurrent: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmLayer {
    pub fn new(params: &mut ParamSet, path: &str, input: usize, hidden: usize, rng: &mut dyn RngCore) -> Result<Self> {
        let h4 = 4 * hidden;
        // Glorot per gate block.
        let wi = glorot_uniform(rng, input, hidden, input * h4);
        let wr = glorot_uniform(rng, hidden, hidden, hidden * h4);
        let mut b = vec![0.0; h4];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let w_input = params.insert(format!("{path}.w_input"), Tensor::matrix(input, h4, wi)?)?;
        let w_recurrent = params.insert(format!("{path}.w_recurrent"), Tensor::matrix(hidden, h4, wr)?)?;
        let bias = params.insert(format!("{path}.bias"), Tensor::vector(b)?)?;
        Ok(LstmLayer {
            w_input,
            w_recurrent,
            bias,
            input,
            hidden,
        })
    }

    /// Run over `steps` (each a vector of width `input`) from zero state.
    pub fn forward(&self, tape: &mut Tape<'_>, steps: &[Var]) -> Result<Var> {
        let zx = self.project(tape, steps)?;
        self.forward_projected(tape, &zx)
    }

    /// Input projections `x·W` of every step in one matrix product.
    ///
    /// Steps from several sequences may be stacked; the result keeps their order.
    pub fn project(&self, tape: &mut Tape<'_>, steps: &[Var]) -> Result<Vec<Var>> {
        if steps.is_empty() {
            return Err(Error::Empty { what: "lstm sequence" });
        }
        let h4 = 4 * self.hidden;
        for &x in steps {
            if tape.shape(x) != [self.input] {
                return Err(Error::dim("lstm", tape.shape(x), &[self.input, h4]));
            }
        }
        let wi = tape.param(self.w_input);
        let m = steps.len();
        if m == 1 {
            return Ok(vec![tape.matmul(steps[0], wi)?]);
        }
        let stacked = tape.concat(steps)?;
        let x = tape.reshape(stacked, vec![m, self.input])?;
        let z = tape.matmul(x, wi)?;
        let z = tape.reshape(z, vec![m * h4])?;
        (0..m).map(|t| tape.slice(z, t * h4, h4)).collect()
    }

    /// Recurrence over precomputed input projections from [`LstmLayer::project`].
    pub fn forward_projected(&self, tape: &mut Tape<'_>, projected: &[Var]) -> Result<Var> {
        if projected.is_empty() {
            return Err(Error::Empty { what: "lstm sequence" });
        }
        let hd = self.hidden;
        let wr = tape.param(self.w_recurrent);
        let b = tape.param(self.bias);
        let mut h = tape.constant_vector(vec![0.0; hd]);
        let mut c = tape.constant_vector(vec![0.0; hd]);
        for &zx in projected {
            if tape.shape(zx) != [4 * hd] {
                return Err(Error::dim("lstm projection", tape.shape(zx), &[4 * hd]));
            }
            let zh = tape.matmul(h, wr)?;
            let z = tape.add(zx, zh)?;
            let z = tape.add(z, b)?;
            let i_pre = tape.slice(z, 0, hd)?;
            let f_pre = tape.slice(z, hd, hd)?;
            let g_pre = tape.slice(z, 2 * hd, hd)?;
            let o_pre = tape.slice(z, 3 * hd, hd)?;
            let i = tape.sigmoid(i_pre);
            let f = tape.sigmoid(f_pre);
            let g = tape.tanh(g_pre);
            let o = tape.sigmoid(o_pre);
            let fc = tape.mul(f, c)?;
            let ig = tape.mul(i, g)?;
            c = tape.add(fc, ig)?;
            let tc = tape.tanh(c);
            h = tape.mul(o, tc)?;
        }
        Ok(h)
    }
}

/// Inverted dropout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
}

impl DropoutSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Contract(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(DropoutSpec { rate })
    }

    /// Keep each unit with probability `1 − rate`, scaling survivors by
    /// `1 / (1 − rate)`. Identity when not training.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, training: bool, rng: &mut dyn RngCore) -> Result<Var> {
        if !training || self.rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = (0..tape.value(x).len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let m = tape.constant(Tensor::new(tape.shape(x).to_vec(), mask)?);
        tape.mul(x, m)
    }
}

/// Fresh parameters for `spec`; identical seeds give bit-identical values.
pub fn init_parameters(spec: &ModelSpec, seed: u64) -> Result<ParamSet> {
    Ok(build_model(spec, seed)?.into_params())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_check, Coordinates};
    use crate::models::{ModelKind, TaskSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn set_all(params: &mut ParamSet, value: f64) {
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            params.get_mut(id).data_mut().iter_mut().for_each(|v| *v = value);
        }
    }

    #[test]
    fn dense_zero_and_identity() {
        let mut p = ParamSet::new();
        let d = DenseLayer::new(&mut p, "d", 3, 3, Activation::Relu, 0.0, &mut rng(0)).unwrap();
        set_all(&mut p, 0.0);
        let mut t = Tape::new(&p);
        let x = t.constant_vector(vec![1.0, -2.0, 3.0]);
        let y = d.forward(&mut t, x).unwrap();
        assert_eq!(t.value(y), &[0.0; 3]);

        let mut p = ParamSet::new();
        let d = DenseLayer::new(&mut p, "d", 3, 3, Activation::Linear, 0.0, &mut rng(0)).unwrap();
        let eye = Tensor::matrix(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        *p.get_mut(d.weight) = eye;
        let mut t = Tape::new(&p);
        let x = t.constant_vector(vec![1.0, -2.0, 3.0]);
        let y = d.forward(&mut t, x).unwrap();
        assert_eq!(t.value(y), &[1.0, -2.0, 3.0]);
        assert!(d.l2_penalty(&mut t).is_none());
    }

    #[test]
    fn vocal_stack_output_width() {
        let mut p = ParamSet::new();
        let mut r = rng(1);
        let l1 = DenseLayer::new(&mut p, "l1", 74, 32, Activation::Relu, 0.0, &mut r).unwrap();
        let l2 = DenseLayer::new(&mut p, "l2", 32, 32, Activation::Relu, 0.0, &mut r).unwrap();
        let l3 = DenseLayer::new(&mut p, "l3", 32, 32, Activation::Relu, 0.0, &mut r).unwrap();
        let mut t = Tape::new(&p);
        let x = t.constant_vector(vec![0.1; 74]);
        let h = l1.forward(&mut t, x).unwrap();
        let h = l2.forward(&mut t, h).unwrap();
        let h = l3.forward(&mut t, h).unwrap();
        assert_eq!(t.shape(h), &[32]);

        let bad = t.constant_vector(vec![0.0; 73]);
        assert!(matches!(l1.forward(&mut t, bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn l2_penalty_is_weight_times_sum_of_squares() {
        let mut p = ParamSet::new();
        let d = DenseLayer::new(&mut p, "d", 4, 3, Activation::Relu, 0.01, &mut rng(3)).unwrap();
        let expected: f64 = 0.01 * p.get(d.weight).data().iter().map(|w| w * w).sum::<f64>();
        let mut t = Tape::new(&p);
        let pen = d.l2_penalty(&mut t).unwrap();
        assert!((t.scalar(pen) - expected).abs() < 1e-15);
    }

    #[test]
    fn glorot_bound_for_vocal_input_layer() {
        assert_eq!(glorot_bound(74, 32), (6.0f64 / 106.0).sqrt());
        let mut p = ParamSet::new();
        let d = DenseLayer::new(&mut p, "d", 74, 32, Activation::Relu, 0.0, &mut rng(9)).unwrap();
        let bound = glorot_bound(74, 32);
        assert!(p.get(d.weight).data().iter().all(|w| w.abs() <= bound));
        assert!(p.get(d.bias).data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn lstm_zero_weights_give_zero_state() {
        let mut p = ParamSet::new();
        let l = LstmLayer::new(&mut p, "lstm", 5, 4, &mut rng(0)).unwrap();
        set_all(&mut p, 0.0);
        let mut t = Tape::new(&p);
        let steps: Vec<Var> = (0..3).map(|i| t.constant_vector(vec![i as f64; 5])).collect();
        let h = l.forward(&mut t, &steps).unwrap();
        assert_eq!(t.value(h), &[0.0; 4]);
        assert!(matches!(l.forward(&mut t, &[]), Err(Error::Empty { .. })));
    }

    #[test]
    fn lstm_forget_bias_starts_at_one() {
        let mut p = ParamSet::new();
        let l = LstmLayer::new(&mut p, "lstm", 3, 2, &mut rng(0)).unwrap();
        assert_eq!(p.get(l.bias).data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn lstm_single_step_matches_hand_cell() {
        let mut p = ParamSet::new();
        let l = LstmLayer::new(&mut p, "lstm", 3, 2, &mut rng(4)).unwrap();
        let x = [0.3, -0.7, 1.1];
        let mut t = Tape::new(&p);
        let xv = t.constant_vector(x.to_vec());
        let hv = l.forward(&mut t, &[xv]).unwrap();
        let h = t.value(hv).to_vec();

        // From zero state only the input matrix and bias matter.
        let wi = p.get(l.w_input).data();
        let b = p.get(l.bias).data();
        let z: Vec<f64> = (0..8)
            .map(|j| b[j] + (0..3).map(|k| x[k] * wi[k * 8 + j]).sum::<f64>())
            .collect();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        for u in 0..2 {
            let i = sig(z[u]);
            let g = z[4 + u].tanh();
            let o = sig(z[6 + u]);
            let c = i * g;
            assert!((h[u] - o * c.tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn lstm_gradients_match_differences() {
        for seed in 0..5 {
            let mut p = ParamSet::new();
            let mut r = rng(20 + seed);
            let l = LstmLayer::new(&mut p, "lstm", 3, 4, &mut r).unwrap();
            let read = DenseLayer::new(&mut p, "out", 4, 1, Activation::Linear, 0.0, &mut r).unwrap();
            let seq: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let target = 0.37;
            let report = finite_difference_check(&p, 1e-5, &Coordinates::All, |t| {
                let steps: Vec<Var> = seq.iter().map(|s| t.constant_vector(s.clone())).collect();
                let h = l.forward(t, &steps)?;
                let y = read.forward(t, h)?;
                let tv = t.constant_vector(vec![target]);
                let d = t.sub(y, tv)?;
                let a = t.abs(d);
                Ok(t.mean(a))
            })
            .unwrap();
            assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn dense_gradients_match_differences() {
        let acts = [Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Softmax, Activation::Linear];
        for seed in 0..5 {
            for act in acts {
                let mut p = ParamSet::new();
                let mut r = rng(40 + seed);
                let d = DenseLayer::new(&mut p, "d", 5, 3, act, 0.01, &mut r).unwrap();
                // Move biases off zero so ReLU kinks are unlikely at the probe point.
                for b in p.get_mut(d.bias).data_mut() {
                    *b = r.gen_range(-0.5..0.5);
                }
                let x: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
                let w: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
                let report = finite_difference_check(&p, 1e-5, &Coordinates::All, |t| {
                    let xv = t.constant_vector(x.clone());
                    let y = d.forward(t, xv)?;
                    let wv = t.constant_vector(w.clone());
                    let m = t.mul(y, wv)?;
                    let s = t.sum(m);
                    let pen = d.l2_penalty(t).expect("l2 > 0");
                    t.add(s, pen)
                })
                .unwrap();
                assert!(report.max_rel_error < 1e-4, "{act:?} seed {seed}: {report:?}");
            }
        }
    }

    #[test]
    fn dropout_identity_cases() {
        let p = ParamSet::new();
        let mut t = Tape::new(&p);
        let x = t.constant_vector(vec![1.0, 2.0, 3.0]);
        let zero = DropoutSpec::new(0.0).unwrap();
        let d = DropoutSpec::new(0.2).unwrap();
        let mut r = rng(0);
        assert_eq!(zero.forward(&mut t, x, true, &mut r).unwrap(), x);
        assert_eq!(zero.forward(&mut t, x, false, &mut r).unwrap(), x);
        assert_eq!(d.forward(&mut t, x, false, &mut r).unwrap(), x);
        assert!(DropoutSpec::new(1.0).is_err());
        assert!(DropoutSpec::new(-0.1).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let p = ParamSet::new();
        let mut t = Tape::new(&p);
        let n = 100_000;
        let x = t.constant_vector(vec![1.0; n]);
        let d = DropoutSpec::new(0.2).unwrap();
        let y = d.forward(&mut t, x, true, &mut rng(77)).unwrap();
        let mean = t.value(y).iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(t.value(y).iter().all(|&v| v == 0.0 || v == 1.25));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let spec = ModelSpec::new(ModelKind::Vocal, TaskSet::ALL);
        let a = init_parameters(&spec, 3).unwrap();
        let b = init_parameters(&spec, 3).unwrap();
        let c = init_parameters(&spec, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
