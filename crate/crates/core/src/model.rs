//! Versioned JSON persistence for fitted estimators.
//!
//! Every file is an envelope `{format_version, library_version, model}` where
//! `model` carries a `kind` tag. Files written by a build with a different
//! `format_version` are refused before the model body is parsed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discrete::NnPlanEstimator;
use crate::error::{Error, Result};
use crate::experiments::LinearOtMap;
use crate::neural::TrainedNn;
use crate::semidual::{SemidualFit, SemidualFitRecord};

/// Schema version of the model envelope.
pub const FORMAT_VERSION: u32 = 1;

/// Library version recorded in every artifact.
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A fitted transport estimator of any supported kind.
#[derive(Debug, Clone)]
pub enum Estimator {
    Fourier(SemidualFit),
    Nn(TrainedNn),
    NnPlan(NnPlanEstimator),
    Linear(LinearOtMap),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelBody {
    Fourier(SemidualFitRecord),
    Nn(TrainedNn),
    NnPlan(NnPlanEstimator),
    Linear(LinearOtMap),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format_version: u32,
    library_version: String,
    model: ModelBody,
}

impl Estimator {
    pub fn kind(&self) -> &'static str {
        match self {
            Estimator::Fourier(_) => "fourier",
            Estimator::Nn(_) => "nn",
            Estimator::NnPlan(_) => "nn_plan",
            Estimator::Linear(_) => "linear",
        }
    }

    /// Transported point. Coordinates the model was not fitted on pass through
    /// for the potential-based estimators.
    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Estimator::Fourier(f) => f.transport(x),
            Estimator::Nn(n) => n.transport(x),
            Estimator::NnPlan(p) => p.transport(x),
            Estimator::Linear(l) => l.transport(x),
        }
    }

    /// Number of coordinates a query point must have.
    pub fn input_dim(&self) -> usize {
        match self {
            Estimator::Fourier(f) => f.potential.basis().ambient_dim(),
            Estimator::Nn(n) => n.net.input_dim(),
            Estimator::NnPlan(p) => p.dim,
            Estimator::Linear(l) => l.dim(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let model = match self {
            Estimator::Fourier(f) => ModelBody::Fourier(f.to_record()),
            Estimator::Nn(n) => ModelBody::Nn(n.clone()),
            Estimator::NnPlan(p) => ModelBody::NnPlan(p.clone()),
            Estimator::Linear(l) => ModelBody::Linear(l.clone()),
        };
        let env = Envelope {
            format_version: FORMAT_VERSION,
            library_version: LIBRARY_VERSION.to_string(),
            model,
        };
        Ok(serde_json::to_string_pretty(&env)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw.get("format_version").and_then(|v| v.as_u64());
        match found {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                let written_by = raw
                    .get("library_version")
                    .and_then(|v| v.as_str())
                    .unwrap_or("unknown");
                return Err(Error::Format(format!(
                    "model format version {v} (written by otmap {written_by}) is not readable by \
                     otmap {LIBRARY_VERSION}, which expects version {FORMAT_VERSION}; \
                     re-fit or convert the model with a matching otmap release"
                )));
            }
            None => return Err(Error::Format("missing integer field `format_version`".into())),
        }
        let env: Envelope = serde_json::from_str(text)?;
        Ok(match env.model {
            ModelBody::Fourier(r) => Estimator::Fourier(SemidualFit::from_record(&r)?),
            ModelBody::Nn(n) => Estimator::Nn(n),
            ModelBody::NnPlan(p) => {
                if p.plan.assignment.len() != p.x.nrows() || p.x.nrows() != p.y.nrows() {
                    return Err(Error::Format("plan length does not match the stored samples".into()));
                }
                Estimator::NnPlan(p)
            }
            ModelBody::Linear(l) => Estimator::Linear(l),
        })
    }
}

pub fn save_model(path: &Path, model: &Estimator) -> Result<()> {
    fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Estimator> {
    Estimator::from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{linear_ot_baseline, uniform_sample};
    use crate::conjugate::ConjugateConfig;
    use crate::neural::{Architecture, NnConfig, Optimizer};

    fn probe() -> Vec<Vec<f64>> {
        let p = uniform_sample(50, 3, 77, 0);
        p.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn assert_same(a: &Estimator, b: &Estimator) {
        for x in probe() {
            let (u, v) = (a.transport(&x), b.transport(&x));
            assert_eq!(u.len(), v.len());
            for (s, t) in u.iter().zip(&v) {
                assert_eq!(s.to_bits(), t.to_bits());
            }
        }
    }

    #[test]
    fn linear_round_trip() {
        let x = uniform_sample(40, 3, 1, 1);
        let y = uniform_sample(40, 3, 1, 2).mapv(|v| 0.5 * v + 0.2);
        let m = Estimator::Linear(linear_ot_baseline(x.view(), y.view()).unwrap());
        let back = Estimator::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.kind(), "linear");
        assert_same(&m, &back);
    }

    #[test]
    fn plan_round_trip() {
        let x = uniform_sample(20, 3, 2, 1);
        let y = uniform_sample(20, 3, 2, 2);
        let m = Estimator::NnPlan(NnPlanEstimator::fit(x, y, 3).unwrap());
        let back = Estimator::from_json(&m.to_json().unwrap()).unwrap();
        assert_same(&m, &back);
    }

    #[test]
    fn nn_round_trip() {
        let x = uniform_sample(30, 3, 3, 1);
        let y = uniform_sample(30, 3, 3, 2);
        let cfg = NnConfig {
            architecture: Architecture::dense(3, vec![8]),
            bound: 10.0,
            nonzero_budget: 0.0,
            j: 0.0,
            learning_rate: 1e-2,
            iterations: 5,
            batch_size: 10,
            optimizer: Optimizer::Sgd { momentum: 0.0 },
            seed: 5,
            conjugate: ConjugateConfig::default(),
        };
        let m = Estimator::Nn(crate::neural::train_nn(x.view(), y.view(), &cfg).unwrap());
        let back = Estimator::from_json(&m.to_json().unwrap()).unwrap();
        assert_same(&m, &back);
    }

    #[test]
    fn version_mismatch_is_refused_with_hint() {
        let x = uniform_sample(10, 3, 4, 1);
        let m = Estimator::Linear(linear_ot_baseline(x.view(), x.view()).unwrap());
        let text = m.to_json().unwrap().replacen("\"format_version\": 1", "\"format_version\": 99", 1);
        let err = Estimator::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("version 99") && err.contains("expects version 1"), "{err}");
    }

    #[test]
    fn corrupted_json_reports_location() {
        let err = Estimator::from_json("{\"format_version\": 1,\n \"model\": [").unwrap_err();
        assert!(matches!(err, Error::Json(_)));
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
