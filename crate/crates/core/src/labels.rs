//! Polarity and intensity classes derived from a sentiment score.
//!
//! Polarity is `Positive` for `score >= 0`, otherwise `Negative`. Intensity
//! bins `|score|` at 0.5, 1.5 and 2.5, each threshold belonging to the higher
//! class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_MIN: f64 = -3.0;
pub const SCORE_MAX: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

/// Intensity classes in one-hot order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intensity {
    Neutral,
    Weak,
    Medium,
    Strong,
}

impl Intensity {
    pub const ALL: [Intensity; 4] = [Intensity::Neutral, Intensity::Weak, Intensity::Medium, Intensity::Strong];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

fn check_range(score: f64) -> Result<()> {
    if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
        return Err(Error::Domain(format!("sentiment score {score} outside [-3, 3]")));
    }
    Ok(())
}

pub fn polarity_of(score: f64) -> Result<Polarity> {
    check_range(score)?;
    Ok(if score >= 0.0 { Polarity::Positive } else { Polarity::Negative })
}

pub fn intensity_of(score: f64) -> Result<Intensity> {
    check_range(score)?;
    let m = score.abs();
    Ok(if m >= 2.5 {
        Intensity::Strong
    } else if m >= 1.5 {
        Intensity::Medium
    } else if m >= 0.5 {
        Intensity::Weak
    } else {
        Intensity::Neutral
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelBundle {
    pub score: f64,
    pub polarity: Polarity,
    pub intensity: Intensity,
}

impl LabelBundle {
    pub fn from_score(score: f64) -> Result<Self> {
        Ok(LabelBundle {
            score,
            polarity: polarity_of(score)?,
            intensity: intensity_of(score)?,
        })
    }
}

/// Training targets for the three heads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetRecord {
    pub score: f64,
    /// 1.0 for `Positive`, 0.0 for `Negative`.
    pub polarity: f64,
    pub intensity: [f64; 4],
}

pub fn encode_targets(bundle: &LabelBundle) -> TargetRecord {
    let mut intensity = [0.0; 4];
    intensity[bundle.intensity.index()] = 1.0;
    TargetRecord {
        score: bundle.score,
        polarity: match bundle.polarity {
            Polarity::Positive => 1.0,
            Polarity::Negative => 0.0,
        },
        intensity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        assert_eq!(polarity_of(3.0).unwrap(), Polarity::Positive);
        assert_eq!(intensity_of(3.0).unwrap(), Intensity::Strong);
        assert_eq!(polarity_of(-2.75).unwrap(), Polarity::Negative);
        assert_eq!(intensity_of(-2.75).unwrap(), Intensity::Strong);
        assert_eq!(polarity_of(0.0).unwrap(), Polarity::Positive);
    }

    #[test]
    fn boundaries() {
        assert_eq!(intensity_of(1.5).unwrap(), Intensity::Medium);
        assert_eq!(intensity_of(2.5).unwrap(), Intensity::Strong);
        assert_eq!(intensity_of(0.5).unwrap(), Intensity::Weak);
        assert_eq!(intensity_of(0.49).unwrap(), Intensity::Neutral);
        assert_eq!(intensity_of(-0.5).unwrap(), Intensity::Weak);
        assert_eq!(polarity_of(-0.0).unwrap(), Polarity::Positive);
    }

    #[test]
    fn out_of_range_is_domain_error() {
        for s in [3.01, -3.5, f64::NAN, f64::INFINITY] {
            assert!(matches!(polarity_of(s), Err(Error::Domain(_))));
            assert!(matches!(intensity_of(s), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn encode_examples() {
        let o1 = encode_targets(&LabelBundle::from_score(3.0).unwrap());
        assert_eq!((o1.score, o1.polarity, o1.intensity), (3.0, 1.0, [0., 0., 0., 1.]));
        let o2 = encode_targets(&LabelBundle::from_score(-2.75).unwrap());
        assert_eq!((o2.score, o2.polarity, o2.intensity), (-2.75, 0.0, [0., 0., 0., 1.]));
        let o0 = encode_targets(&LabelBundle::from_score(0.0).unwrap());
        assert_eq!((o0.score, o0.polarity, o0.intensity), (0.0, 1.0, [1., 0., 0., 0.]));
    }

    proptest! {
        #[test]
        fn intensity_is_sign_symmetric(s in -3.0f64..=3.0) {
            prop_assert_eq!(intensity_of(s).unwrap(), intensity_of(-s).unwrap());
        }

        #[test]
        fn polarity_follows_sign(s in -3.0f64..=3.0) {
            let p = polarity_of(s).unwrap();
            prop_assert_eq!(p == Polarity::Positive, s >= 0.0);
        }
    }
}
