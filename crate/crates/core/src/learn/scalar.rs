//! Scalar targets and one-dimensional calibration.

use crate::domain::{Assignment, GroupCollection, Nature, Population, Predictor, TypeSpace, VectorTable};
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::metrics::AuditReport;

use super::{run_scalar_loop, LearnError, LearnMode, LearnTrace, LearnerConfig};

/// `q*(x) = sum_beta beta * nature(x)_beta` over numeric types.
pub fn expectation_target(nature: &Nature) -> Result<Vec<f64>> {
    let values = nature
        .types()
        .values
        .as_ref()
        .ok_or_else(|| Error::InvalidTypeSpace("expectation target needs numeric type values".into()))?;
    Ok((0..nature.len()).map(|x| nature.at(x).iter().zip(values).map(|(p, v)| p * v).sum::<f64>().clamp(0.0, 1.0)).collect())
}

/// `p*(x) = (1 - sum_t (l(t,1) - l(t,0)) nature(x)_t) / 2`.
pub fn loss_weighted_target(nature: &Nature, loss: &LossFunction) -> Result<Vec<f64>> {
    if loss.k() != nature.k() {
        return Err(Error::Dimension { expected: nature.k(), got: loss.k() });
    }
    Ok((0..nature.len())
        .map(|x| {
            let d: f64 = nature.at(x).iter().enumerate().map(|(t, p)| p * loss.gap(t)).sum();
            ((1.0 - d) / 2.0).clamp(0.0, 1.0)
        })
        .collect())
}

/// The 2-type nature `(q, 1 - q)`.
pub fn encode_scalar(target: &[f64]) -> Result<Nature> {
    if target.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidVector("scalar targets must lie in [0,1]".into()));
    }
    let data = target.iter().flat_map(|&q| [q, 1.0 - q]).collect();
    Ok(Nature::from_table(TypeSpace::new(2)?, VectorTable::from_raw(2, data)))
}

/// Mean-preserving lift of a scalar onto the two adjacent numeric types.
pub fn lift_scalar(q: &[f64], types: &TypeSpace) -> Result<Predictor> {
    let values = types.values.as_ref().ok_or_else(|| Error::InvalidTypeSpace("lift needs numeric type values".into()))?;
    let k = values.len();
    let mut data = vec![0.0; q.len() * k];
    for (x, &v) in q.iter().enumerate() {
        let row = &mut data[x * k..(x + 1) * k];
        if v <= values[0] {
            row[0] = 1.0;
        } else if v >= values[k - 1] {
            row[k - 1] = 1.0;
        } else {
            let i = values.partition_point(|&b| b <= v) - 1;
            let w = (v - values[i]) / (values[i + 1] - values[i]);
            row[i] = 1.0 - w;
            row[i + 1] = w;
        }
    }
    Ok(Predictor::from_table(VectorTable::from_raw(k, data)))
}

#[derive(Debug, Clone)]
pub struct ScalarOutcome {
    pub predictor: Vec<f64>,
    pub trace: LearnTrace,
    /// Full calibration audit of `(p~, 1 - p~)` against `(p*, 1 - p*)`.
    pub report: AuditReport,
}

/// One-dimensional multi-calibration of a scalar predictor toward `target`.
pub fn learn_scalar_calibrated(pop: &Population, target: &[f64], c: &GroupCollection, cfg: &LearnerConfig) -> std::result::Result<ScalarOutcome, LearnError> {
    if target.len() != pop.size() {
        return Err(Error::Dimension { expected: pop.size(), got: target.len() }.into());
    }
    let nature = encode_scalar(target)?;
    let mut cfg = cfg.clone();
    cfg.mode = LearnMode::ScalarMc;
    let wrap = |o: super::LearnOutcome| ScalarOutcome {
        predictor: (0..o.predictor.len()).map(|x| o.predictor.at(x)[0]).collect(),
        trace: o.trace,
        report: o.report,
    };
    match run_scalar_loop(pop, &nature, c, &cfg) {
        Ok(o) => Ok(wrap(o)),
        Err(LearnError::BudgetExhausted(o)) => {
            let s = wrap(*o);
            Err(LearnError::BudgetExhausted(Box::new(super::LearnOutcome {
                predictor: encode_scalar(&s.predictor)?.as_predictor(),
                trace: s.trace,
                report: s.report,
            })))
        }
        Err(e) => Err(e),
    }
}
