//! Binary-action losses `l(t, a)` and their nontriviality certificates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dec;
use crate::error::{Error, Result};

/// Evidence that a loss is nontrivial: a type with a large action gap and a
/// pair of types preferring opposite actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NontrivialityCertificate {
    #[serde(serialize_with = "dec::ser_f64", deserialize_with = "dec::de_f64")]
    pub alpha: f64,
    /// Type with `|l(t,1) - l(t,0)| >= alpha`.
    pub witness: usize,
    /// Type with `l(t,1) > l(t,0)`.
    pub reject_type: usize,
    /// Type with `l(t,1) < l(t,0)`.
    pub accept_type: usize,
}

/// Loss table with rows `[l(t,0), l(t,1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossDoc", into = "LossDoc")]
pub struct LossFunction {
    table: Vec<[f64; 2]>,
    certificate: Option<NontrivialityCertificate>,
}

#[derive(Serialize, Deserialize)]
struct LossDoc {
    #[serde(serialize_with = "dec::ser_rows", deserialize_with = "dec::de_rows")]
    table: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certificate: Option<NontrivialityCertificate>,
}

impl TryFrom<LossDoc> for LossFunction {
    type Error = Error;
    fn try_from(d: LossDoc) -> Result<Self> {
        let mut rows = Vec::with_capacity(d.table.len());
        for r in d.table {
            if r.len() != 2 {
                return Err(Error::InvalidLoss("each row needs l(t,0) and l(t,1)".into()));
            }
            rows.push([r[0], r[1]]);
        }
        let l = LossFunction::new(rows)?;
        match d.certificate {
            Some(c) => l.with_certificate(c),
            None => Ok(l),
        }
    }
}

impl From<LossFunction> for LossDoc {
    fn from(l: LossFunction) -> Self {
        LossDoc { table: l.table.iter().map(|r| r.to_vec()).collect(), certificate: l.certificate }
    }
}

impl LossFunction {
    pub fn new(table: Vec<[f64; 2]>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::InvalidLoss("need at least two types".into()));
        }
        if table.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidLoss("entries must lie in [0,1]".into()));
        }
        Ok(Self { table, certificate: None })
    }

    /// The 0/1 loss on two types: type 0 should be rejected, type 1 accepted.
    pub fn zero_one() -> Self {
        Self::new(vec![[0.0, 1.0], [1.0, 0.0]]).unwrap().certified().unwrap()
    }

    /// `l(v, a) = (1 - v) a0[a] + v a1[a]` on numeric type values.
    pub fn linear(values: &[f64], a0: [f64; 2], a1: [f64; 2]) -> Result<Self> {
        Self::new(values.iter().map(|&v| [(1.0 - v) * a0[0] + v * a1[0], (1.0 - v) * a0[1] + v * a1[1]]).collect())
    }

    pub fn k(&self) -> usize {
        self.table.len()
    }

    pub fn value(&self, t: usize, a: usize) -> f64 {
        self.table[t][a]
    }

    pub fn table(&self) -> &[[f64; 2]] {
        &self.table
    }

    /// `l(t,1) - l(t,0)`; positive means rejecting is better.
    pub fn gap(&self, t: usize) -> f64 {
        self.table[t][1] - self.table[t][0]
    }

    pub fn certificate(&self) -> Option<&NontrivialityCertificate> {
        self.certificate.as_ref()
    }

    pub fn with_certificate(mut self, c: NontrivialityCertificate) -> Result<Self> {
        let k = self.k();
        if c.witness >= k || c.reject_type >= k || c.accept_type >= k {
            return Err(Error::InvalidLoss("certificate index out of range".into()));
        }
        if !(c.alpha > 0.0) || self.gap(c.witness).abs() < c.alpha {
            return Err(Error::InvalidLoss("certificate alpha not attained by witness".into()));
        }
        if self.gap(c.reject_type) <= 0.0 || self.gap(c.accept_type) >= 0.0 {
            return Err(Error::InvalidLoss("certificate types do not have opposite signs".into()));
        }
        self.certificate = Some(c);
        Ok(self)
    }

    /// Attach the tightest certificate, if the loss is nontrivial.
    pub fn certified(self) -> Result<Self> {
        let k = self.k();
        let witness = (0..k)
            .max_by(|&a, &b| self.gap(a).abs().partial_cmp(&self.gap(b).abs()).unwrap().then(b.cmp(&a)))
            .unwrap();
        let reject_type = (0..k).filter(|&t| self.gap(t) > 0.0).max_by(|&a, &b| self.gap(a).partial_cmp(&self.gap(b)).unwrap().then(b.cmp(&a)));
        let accept_type = (0..k).filter(|&t| self.gap(t) < 0.0).min_by(|&a, &b| self.gap(a).partial_cmp(&self.gap(b)).unwrap().then(a.cmp(&b)));
        match (reject_type, accept_type) {
            (Some(r), Some(a)) => {
                let c = NontrivialityCertificate { alpha: self.gap(witness).abs(), witness, reject_type: r, accept_type: a };
                self.with_certificate(c)
            }
            _ => Err(Error::InvalidLoss("no pair of types with opposite action preferences".into())),
        }
    }

    /// A random loss with at least one reject-better and one accept-better type.
    pub fn random_nontrivial<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        loop {
            let table: Vec<[f64; 2]> = (0..k).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            if let Ok(l) = Self::new(table).and_then(|l| l.certified()) {
                if l.certificate.as_ref().unwrap().alpha > 1e-3 {
                    return l;
                }
            }
        }
    }
}
