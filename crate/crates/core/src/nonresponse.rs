//! MAR response mechanisms.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::popgen::{q_score, s1_score, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Mechanism {
    Nr1,
    Nr2,
    Nr3,
    Nr4,
    /// Sigmoid mechanism of the high-dimensional study.
    HdSigmoid,
    /// Every unit responds with the same probability.
    Constant(f64),
}

impl Mechanism {
    /// Number of leading predictor columns the formula reads.
    pub fn required_predictors(&self) -> usize {
        match self {
            Mechanism::Nr2 | Mechanism::Constant(_) => 0,
            Mechanism::HdSigmoid => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mechanism::Nr1 => f.write_str("NR1"),
            Mechanism::Nr2 => f.write_str("NR2"),
            Mechanism::Nr3 => f.write_str("NR3"),
            Mechanism::Nr4 => f.write_str("NR4"),
            Mechanism::HdSigmoid => f.write_str("HD"),
            Mechanism::Constant(p) => write!(f, "CONST{p}"),
        }
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Ok(match up.as_str() {
            "NR1" => Mechanism::Nr1,
            "NR2" => Mechanism::Nr2,
            "NR3" => Mechanism::Nr3,
            "NR4" => Mechanism::Nr4,
            "HD" | "HD_SIGMOID" => Mechanism::HdSigmoid,
            "FULL" => Mechanism::Constant(1.0),
            _ => match up.strip_prefix("CONST") {
                Some(p) => {
                    let p: f64 = p
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad constant mechanism '{s}'")))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::invalid(format!("response probability {p} outside [0,1]")));
                    }
                    Mechanism::Constant(p)
                }
                None => return Err(Error::invalid(format!("unknown mechanism '{s}'"))),
            },
        })
    }
}

impl TryFrom<String> for Mechanism {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mechanism> for String {
    fn from(m: Mechanism) -> String {
        m.to_string()
    }
}

fn raw_prob(mechanism: Mechanism, x: &[f64]) -> f64 {
    match mechanism {
        Mechanism::Nr1 => s1_score(x),
        Mechanism::Nr2 => 0.5,
        Mechanism::Nr3 => 0.55 * q_score(x) + 0.02 - 0.01 * x[1].powi(3),
        Mechanism::Nr4 => 0.5 * q_score(x) + 0.13 - 0.1 * (x[0].sin() + x[1].cos()),
        Mechanism::HdSigmoid => {
            0.1 + 0.89 * sigmoid(-0.83 + 0.001 * (2.0 * x[0] + 2.0 * x[1] - 2.5 * x[2]))
        }
        Mechanism::Constant(p) => p,
    }
}

/// Response probability for one predictor row, clamped to [0, 1].
pub fn response_prob(mechanism: Mechanism, x_row: &[f64]) -> Result<f64> {
    let need = mechanism.required_predictors();
    if x_row.len() < need {
        return Err(Error::Arity {
            expected: need,
            got: x_row.len(),
        });
    }
    Ok(raw_prob(mechanism, x_row).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    pub indicators: Vec<bool>,
    pub realized_rate: f64,
}

impl ResponseSet {
    pub fn n_respondents(&self) -> usize {
        self.indicators.iter().filter(|r| **r).count()
    }
}

pub fn generate_response<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> ResponseSet {
    let indicators: Vec<bool> = probabilities
        .iter()
        .map(|&p| {
            let u: f64 = rng.random();
            u < p
        })
        .collect();
    let realized_rate = if indicators.is_empty() {
        0.0
    } else {
        indicators.iter().filter(|r| **r).count() as f64 / indicators.len() as f64
    };
    ResponseSet {
        indicators,
        realized_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::draw_srswor;
    use crate::popgen::generate_predictors;
    use crate::rng::seeded;

    #[test]
    fn nr2_constant() {
        assert_eq!(response_prob(Mechanism::Nr2, &[]).unwrap(), 0.5);
        assert_eq!(response_prob(Mechanism::Nr2, &[9.0, -3.0, 1.0, 0.0, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn nr3_constant_term() {
        // q = 0 and x2 = 0 leave the constant 0.02
        let x = [0.0, 0.0, 0.0, 0.0, 3.0];
        let q = q_score(&x);
        let p = response_prob(Mechanism::Nr3, &x).unwrap();
        assert!((p - (0.55 * q + 0.02)).abs() < 1e-15);
        assert_eq!(0.55 * 0.0 + 0.02 - 0.01 * 0.0f64.powi(3), 0.02);
    }

    #[test]
    fn nr1_hand_value() {
        let x = [0.5, -0.2, 0.1, 1.0, 3.0];
        // index = 1 - 0.4 + 0.2 - 1 - 0.1 = -0.3
        let hand = 0.1 + 0.79 / (1.0f64 + 0.5 * (0.75 - 0.3)).exp();
        assert!((response_prob(Mechanism::Nr1, &x).unwrap() - hand).abs() < 1e-14);
        // extreme rows clamp to 1
        assert_eq!(response_prob(Mechanism::Nr1, &[-5.0, -5.0, -5.0, 0.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn missing_predictor_rejected() {
        assert!(response_prob(Mechanism::Nr4, &[0.0, 1.0]).is_err());
        assert!(response_prob(Mechanism::HdSigmoid, &[1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn parse_roundtrip() {
        for m in [Mechanism::Nr1, Mechanism::Nr4, Mechanism::HdSigmoid, Mechanism::Constant(1.0)] {
            assert_eq!(m.to_string().parse::<Mechanism>().unwrap(), m);
        }
        assert!("NR9".parse::<Mechanism>().is_err());
    }

    #[test]
    fn degenerate_probabilities() {
        let r = generate_response(&[1.0; 10], &mut seeded(1));
        assert_eq!(r.realized_rate, 1.0);
        let r = generate_response(&[0.0; 10], &mut seeded(1));
        assert_eq!(r.realized_rate, 0.0);
    }

    #[test]
    fn mechanisms_near_half() {
        let mut rng = seeded(11);
        for mech in [Mechanism::Nr1, Mechanism::Nr3, Mechanism::Nr4] {
            let mut rate = 0.0;
            for _ in 0..200 {
                let pop = generate_predictors(4000, &mut rng);
                let s = draw_srswor(4000, 1000, &mut rng).unwrap();
                let p: Vec<f64> = s
                    .unit_ids
                    .iter()
                    .map(|&i| response_prob(mech, pop.values.row(i)).unwrap())
                    .collect();
                rate += generate_response(&p, &mut rng).realized_rate;
            }
            rate /= 200.0;
            assert!((0.45..=0.56).contains(&rate), "{mech}: {rate}");
        }
    }
}
