//! Seeded synthetic segments with planted sentiment signal.
//!
//! Each segment draws a polarity `p ∈ {−1, +1}` (fair coin) and a magnitude
//! `m ~ U[0, 3]`. The clean score is `p·m` and the gold score is
//! `clamp(p·m + noise_level·ε, −3, 3)` with `ε ~ N(0, 1)`, rounded to 4
//! decimals. Three planted channel values are derived from it:
//!
//! | aspect      | value            | range    |
//! |-------------|------------------|----------|
//! | `score`     | `p·m / 3`        | [−1, 1]  |
//! | `polarity`  | `p`              | {−1, 1}  |
//! | `intensity` | `(m − 1.5) / 1.5`| [−1, 1]  |
//!
//! A modality carrying aspect `a` adds `amplitude · value_a · u_a` to every
//! word embedding (verbal) or frame (vocal/visual), where `u_a` is a fixed
//! random unit direction per (modality, aspect). Word embeddings also carry a
//! per-token background vector (`N(0, background_std²)` per coordinate,
//! drawn once per vocabulary entry); frames carry i.i.d. `N(0, frame_noise²)`
//! noise. All stored values are rounded to 4 decimals, so serialization
//! round-trips exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::record::{Frame, SegmentRecord, Word, VERBAL_DIM, VISUAL_DIM, VOCAL_DIM};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Score,
    Polarity,
    Intensity,
}

const ASPECTS: [Aspect; 3] = [Aspect::Score, Aspect::Polarity, Aspect::Intensity];

/// Which aspects each modality carries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSpec {
    pub vocal: Vec<Aspect>,
    pub visual: Vec<Aspect>,
    pub verbal: Vec<Aspect>,
}

impl SignalSpec {
    /// Only the verbal channel carries the score.
    pub fn verbal_only() -> Self {
        SignalSpec {
            verbal: vec![Aspect::Score],
            ..Default::default()
        }
    }

    /// Polarity in the verbal channel, intensity in the vocal channel; no
    /// modality sees the score directly.
    pub fn split_aspects() -> Self {
        SignalSpec {
            vocal: vec![Aspect::Intensity],
            verbal: vec![Aspect::Polarity],
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_segments: usize,
    pub max_words: usize,
    pub signal: SignalSpec,
    pub noise_level: f64,
    pub amplitude: f64,
    pub background_std: f64,
    pub frame_noise: f64,
    pub vocab_size: usize,
    pub vocal_rate_hz: f64,
    pub visual_rate_hz: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_segments: 100,
            max_words: 8,
            signal: SignalSpec::verbal_only(),
            noise_level: 0.1,
            amplitude: 2.0,
            background_std: 0.3,
            frame_noise: 0.5,
            vocab_size: 64,
            vocal_rate_hz: 100.0,
            visual_rate_hz: 30.0,
        }
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

struct Channel {
    directions: Vec<(Aspect, Vec<f64>)>,
    carried: Vec<Aspect>,
}

impl Channel {
    fn new(rng: &mut ChaCha8Rng, dim: usize, carried: &[Aspect]) -> Self {
        // All three directions are always drawn so the stream does not
        // depend on the signal spec.
        let directions = ASPECTS.iter().map(|&a| (a, unit_direction(rng, dim))).collect();
        Channel {
            directions,
            carried: carried.to_vec(),
        }
    }

    fn planted(&self, values: &[(Aspect, f64)], amplitude: f64, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (aspect, dir) in &self.directions {
            if !self.carried.contains(aspect) {
                continue;
            }
            let value = values.iter().find(|(a, _)| a == aspect).map(|(_, v)| *v).unwrap_or(0.0);
            out.iter_mut().zip(dir).for_each(|(o, d)| *o += amplitude * value * d);
        }
        out
    }
}

fn frames(rng: &mut ChaCha8Rng, rate: f64, until: f64, planted: &[f64], noise: f64) -> Vec<Frame> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let n = (until * rate).ceil() as usize;
    (0..n)
        .map(|k| Frame {
            time: round4(k as f64 / rate),
            features: planted
                .iter()
                .map(|p| {
                    let e: f64 = StandardNormal.sample(rng);
                    round4(p + noise * e)
                })
                .collect(),
        })
        .collect()
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<Vec<SegmentRecord>> {
    if config.n_segments == 0 {
        return Err(Error::Config("n_segments must be at least 1".into()));
    }
    if config.max_words == 0 || config.vocab_size == 0 {
        return Err(Error::Config("max_words and vocab_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocal = Channel::new(&mut rng, VOCAL_DIM, &config.signal.vocal);
    let visual = Channel::new(&mut rng, VISUAL_DIM, &config.signal.visual);
    let verbal = Channel::new(&mut rng, VERBAL_DIM, &config.signal.verbal);
    let vocab: Vec<Vec<f64>> = (0..config.vocab_size)
        .map(|_| {
            (0..VERBAL_DIM)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    config.background_std * e
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(config.n_segments);
    for i in 0..config.n_segments {
        let p = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let m: f64 = rng.gen_range(0.0..=3.0);
        let eps: f64 = StandardNormal.sample(&mut rng);
        let gold = round4((p * m + config.noise_level * eps).clamp(-3.0, 3.0));
        let values = [
            (Aspect::Score, p * m / 3.0),
            (Aspect::Polarity, p),
            (Aspect::Intensity, (m - 1.5) / 1.5),
        ];

        let n_words = rng.gen_range(1..=config.max_words);
        let planted_verbal = verbal.planted(&values, config.amplitude, VERBAL_DIM);
        let mut t = 0.0;
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            t += rng.gen_range(0.0..0.05);
            let start = round4(t);
            t += rng.gen_range(0.2..0.5);
            let end = round4(t);
            let tok = rng.gen_range(0..config.vocab_size);
            let embedding = vocab[tok]
                .iter()
                .zip(&planted_verbal)
                .map(|(b, s)| round4(b + s))
                .collect();
            words.push(Word {
                token: format!("w{tok}"),
                start,
                end,
                embedding,
            });
        }
        let until = t + 0.05;
        let planted_vocal = vocal.planted(&values, config.amplitude, VOCAL_DIM);
        let planted_visual = visual.planted(&values, config.amplitude, VISUAL_DIM);
        let vocal_frames = frames(&mut rng, config.vocal_rate_hz, until, &planted_vocal, config.frame_noise);
        let visual_frames = frames(&mut rng, config.visual_rate_hz, until, &planted_visual, config.frame_noise);

        out.push(SegmentRecord {
            video_id: format!("syn{:03}", i / 10),
            segment_id: (i % 10 + 1).to_string(),
            gold_score: gold,
            words,
            vocal_frames,
            visual_frames,
        });
    }
    Ok(out)
}
