//! Canonical partitions and omniprediction post-processing.

use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Discretization, Group, GroupCollection, Nature, Population, Predictor, VectorTable};
use crate::error::Result;
use crate::loss::LossFunction;
use crate::metrics::{mc_full_error, ActionFunction};
use crate::rules::{compose, loss_min_rule};

/// Partition of the domain by discretized prediction, with the per-cell
/// weighted nature average `R^T`.
#[derive(Debug, Clone)]
pub struct CanonicalPartition {
    pub cells: Vec<(Vec<usize>, Vec<usize>)>,
    pub masses: Vec<f64>,
    pub canonical: Predictor,
}

pub fn canonical_partition<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, d: &Discretization) -> CanonicalPartition {
    let all = Group::full(pop.size());
    let cells: Vec<(Vec<usize>, Vec<usize>)> = crate::metrics::realized_cells(pred, &all, d).into_iter().collect();
    let k = nature.k();
    let mut data = vec![0.0; pop.size() * k];
    let mut masses = Vec::with_capacity(cells.len());
    for (_, xs) in &cells {
        let mass = pop.mass(xs);
        let mut avg = vec![0.0; k];
        if mass > 0.0 {
            for &x in xs {
                for (a, v) in avg.iter_mut().zip(nature.at(x)) {
                    *a += pop.weight(x) * v;
                }
            }
            avg.iter_mut().for_each(|a| *a /= mass);
        } else {
            // Zero-mass cell: plain average keeps rows stochastic.
            for &x in xs {
                for (a, v) in avg.iter_mut().zip(nature.at(x)) {
                    *a += v / xs.len() as f64;
                }
            }
        }
        for &x in xs {
            data[x * k..(x + 1) * k].copy_from_slice(&avg);
        }
        masses.push(mass);
    }
    CanonicalPartition { cells, masses, canonical: Predictor::from_table(VectorTable::from_raw(k, data)) }
}

/// Indicators of every group and of its complement.
pub fn indicator_class(n: usize, c: &GroupCollection) -> Vec<ActionFunction> {
    c.groups()
        .iter()
        .flat_map(|g| [ActionFunction::indicator(n, g), ActionFunction::indicator(n, &g.complement(n, format!("{}^c", g.id)))])
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Omniprediction {
    pub action: ActionFunction,
    /// Measured full calibration error of the predictor over `C`.
    pub alpha: f64,
    pub lambda: f64,
    /// `3 k (alpha + lambda)`.
    pub bound: f64,
}

/// `rho*_l` composed with a calibrated predictor, with its certified bound.
pub fn omnipredict<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, loss: &LossFunction, c: &GroupCollection, d: &Discretization) -> Result<Omniprediction> {
    let alpha = mc_full_error(pop, nature, pred, c, d)?.max_gap;
    let k = nature.k() as f64;
    Ok(Omniprediction {
        action: compose(&loss_min_rule(loss), pred),
        alpha,
        lambda: d.lambda(),
        bound: 3.0 * k * (alpha + d.lambda()),
    })
}
