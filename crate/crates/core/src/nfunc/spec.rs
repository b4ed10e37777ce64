use serde::{Deserialize, Serialize};

use super::{NFunction, NFunctionKind};
use crate::error::Result;
use crate::scalar::Scalar;

/// JSON description of an N-function, e.g. `{"kind": "sumpower", "p": 2, "q": 3}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NFunctionSpec {
    Power { p: f64 },
    PowerLog { p: f64 },
    MaxPower { p: f64, q: f64 },
    SumPower { p: f64, q: f64 },
    ExpSquare,
    /// Samples `[t, φ(t)]`.
    Tabulated { samples: Vec<[f64; 2]> },
}

impl NFunctionSpec {
    pub fn build<T: Scalar>(&self) -> Result<NFunction<T>> {
        match self {
            NFunctionSpec::Power { p } => NFunction::power(T::lit(*p)),
            NFunctionSpec::PowerLog { p } => NFunction::power_log(T::lit(*p)),
            NFunctionSpec::MaxPower { p, q } => NFunction::max_power(T::lit(*p), T::lit(*q)),
            NFunctionSpec::SumPower { p, q } => NFunction::sum_power(T::lit(*p), T::lit(*q)),
            NFunctionSpec::ExpSquare => Ok(NFunction::exp_square()),
            NFunctionSpec::Tabulated { samples } => {
                let pts: Vec<(T, T)> = samples.iter().map(|s| (T::lit(s[0]), T::lit(s[1]))).collect();
                NFunction::tabulated(&pts)
            }
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl<T: Scalar> NFunction<T> {
    /// The JSON description this N-function can be rebuilt from.
    pub fn to_spec(&self) -> NFunctionSpec {
        let f = |x: T| x.to_f64_lossy();
        match self.kind() {
            NFunctionKind::Power { p } => NFunctionSpec::Power { p: f(*p) },
            NFunctionKind::PowerLog { p } => NFunctionSpec::PowerLog { p: f(*p) },
            NFunctionKind::MaxPower { p, q } => NFunctionSpec::MaxPower { p: f(*p), q: f(*q) },
            NFunctionKind::SumPower { p, q } => NFunctionSpec::SumPower { p: f(*p), q: f(*q) },
            NFunctionKind::ExpSquare => NFunctionSpec::ExpSquare,
            NFunctionKind::Tabulated(tab) => NFunctionSpec::Tabulated {
                samples: tab
                    .knots()
                    .iter()
                    .map(|&t| [f(t), f(tab.flux(t) / t)])
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let cases = [
            r#"{"kind":"power","p":3}"#,
            r#"{"kind":"powerlog","p":2}"#,
            r#"{"kind":"maxpower","p":4,"q":2}"#,
            r#"{"kind":"sumpower","p":2,"q":3}"#,
            r#"{"kind":"expsquare"}"#,
            r#"{"kind":"tabulated","samples":[[0.5,1.0],[1.0,1.5],[2.0,2.0]]}"#,
        ];
        for c in cases {
            let spec = NFunctionSpec::from_json(c).unwrap();
            let nf: NFunction<f64> = spec.build().unwrap();
            assert_eq!(nf.to_spec().build::<f64>().unwrap(), nf);
        }
    }

    #[test]
    fn rejects_unknown_kind_and_bad_exponent() {
        assert!(NFunctionSpec::from_json(r#"{"kind":"cosh"}"#).is_err());
        let spec = NFunctionSpec::from_json(r#"{"kind":"power","p":0.5}"#).unwrap();
        assert!(spec.build::<f64>().is_err());
    }
}
