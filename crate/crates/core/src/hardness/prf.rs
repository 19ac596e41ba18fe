//! Keyed pseudorandom subsets and key-oblivious probes.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Assignment, Discretization, Group, Nature, Population, TypeSpace, VectorTable};
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::rng::RandomStream;
use crate::simplex::{unit_vector, StochasticVector};

/// A 128-bit PRF key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrfKey(pub u128);

impl PrfKey {
    /// Key derived from a trial seed.
    pub fn from_seed(seed: u64) -> Self {
        Self(RandomStream::new(seed).derive("prf-key").rng().gen())
    }

    pub fn hex(&self) -> String {
        format!("{:032x}", self.0)
    }

    /// `F_key(index)` in [0,1): first 53 bits of SHA-256(key || index).
    pub fn eval(&self, index: u64) -> f64 {
        let mut h = Sha256::new();
        h.update(self.0.to_le_bytes());
        h.update(index.to_le_bytes());
        let out = h.finalize();
        let v = u64::from_be_bytes(out[..8].try_into().unwrap());
        (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl Serialize for PrfKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.hex())
    }
}

impl<'de> Deserialize<'de> for PrfKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        u128::from_str_radix(&s, 16).map(PrfKey).map_err(serde::de::Error::custom)
    }
}

/// `4 sqrt(gamma (1 - gamma) / n)`.
pub fn fraction_tolerance(gamma: f64, n: usize) -> f64 {
    4.0 * (gamma * (1.0 - gamma) / n as f64).sqrt()
}

/// `{x : F_key(x) < gamma}`.
#[derive(Debug, Clone)]
pub struct PseudorandomSubset {
    pub key: PrfKey,
    pub gamma: f64,
    mask: Vec<bool>,
    pub realized: f64,
}

impl PseudorandomSubset {
    pub fn contains(&self, x: usize) -> bool {
        self.mask[x]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn size(&self) -> usize {
        self.mask.len()
    }

    pub fn as_group(&self, id: &str) -> Group {
        Group::from_mask(id, &self.mask)
    }

    pub fn within_tolerance(&self) -> bool {
        (self.realized - self.gamma).abs() <= fraction_tolerance(self.gamma, self.size())
    }
}

pub fn pr_subset(key: PrfKey, gamma: f64, pop: &Population) -> Result<PseudorandomSubset> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config(format!("gamma {gamma} not in (0,1)")));
    }
    if !pop.is_uniform() {
        return Err(Error::InvalidPopulation("pseudorandom subsets need a uniform population".into()));
    }
    let mask: Vec<bool> = (0..pop.size()).map(|x| key.eval(x as u64) < gamma).collect();
    let count = mask.iter().filter(|&&b| b).count();
    let realized = count as f64 / pop.size() as f64;
    if count == 0 || count == pop.size() {
        return Err(Error::DegenerateSubset(realized));
    }
    Ok(PseudorandomSubset { key, gamma, mask, realized })
}

/// Index-hash groups built without the subset key; group `j` has fraction `fractions[j % len]`.
pub fn hash_groups(n: usize, count: usize, fractions: &[f64], stream: &RandomStream, prefix: &str) -> Vec<Group> {
    (0..count)
        .map(|j| {
            let s = stream.child(j as u64);
            let f = fractions[j % fractions.len()];
            Group::new(format!("{prefix}{j}"), (0..n).filter(|&x| s.uniform_at(x as u64) < f).collect())
        })
        .collect()
}

/// Nonempty coordinate level sets of a predictor, usable as probes.
pub fn level_set_probes<A: Assignment + ?Sized>(pred: &A, d: &Discretization) -> Vec<Group> {
    let (n, k, b) = (pred.len(), pred.k(), d.bins());
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k * b];
    for x in 0..n {
        for t in 0..k {
            buckets[t * b + d.index(pred.at(x)[t])].push(x);
        }
    }
    buckets
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(i, v)| Group::new(format!("level-t{}-b{}", i / b, i % b), v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub max_advantage: f64,
    pub witness: Option<String>,
}

/// `max_P |Pr[x in X1 | x in P] - realized gamma|`.
pub fn indistinguishability_probe(subset: &PseudorandomSubset, probes: &[Group], pop: &Population) -> Result<ProbeResult> {
    let total: f64 = (0..pop.size()).filter(|&x| subset.contains(x)).map(|x| pop.weight(x)).sum();
    let mut best = ProbeResult { max_advantage: 0.0, witness: None };
    for p in probes {
        let mass = pop.mass(p.members());
        if mass < 0.01 {
            return Err(Error::UndersizedProbe { id: p.id.clone(), fraction: mass });
        }
        let inside: f64 = p.members().iter().filter(|&&x| subset.contains(x)).map(|&x| pop.weight(x)).sum();
        let adv = (inside / mass - total).abs();
        if adv > best.max_advantage || best.witness.is_none() {
            best = ProbeResult { max_advantage: adv.max(best.max_advantage), witness: Some(p.id.clone()) };
        }
    }
    Ok(best)
}

/// Members of `subset` get `y`, the rest `y2`.
pub fn nature_two_block(subset: &PseudorandomSubset, y: &StochasticVector, y2: &StochasticVector) -> Result<Nature> {
    if y.k() != y2.k() {
        return Err(Error::Dimension { expected: y.k(), got: y2.k() });
    }
    let k = y.k();
    let data = (0..subset.size()).flat_map(|x| if subset.contains(x) { y.as_slice() } else { y2.as_slice() }.iter().copied()).collect();
    Ok(Nature::from_table(TypeSpace::new(k)?, VectorTable::from_raw(k, data)))
}

/// Types used by the loss-conflict construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConflictTypes {
    /// Type with the largest action gap, given to the 3/4 block.
    pub major: usize,
    /// Opposite-preference type given to the rest.
    pub minor: usize,
    /// True when the major type prefers accepting (roles of the actions swap).
    pub swapped: bool,
}

/// Nature with a 3/4 pseudorandom block of the certificate's witness type.
pub fn nature_loss_conflict(loss: &LossFunction, pop: &Population, key: PrfKey) -> Result<(Nature, PseudorandomSubset, LossConflictTypes)> {
    let c = loss.certificate().ok_or_else(|| Error::MissingCertificate("loss conflict needs a nontriviality certificate".into()))?;
    let major = c.witness;
    let swapped = loss.gap(major) < 0.0;
    let minor = if swapped { c.reject_type } else { c.accept_type };
    let subset = pr_subset(key, 0.75, pop)?;
    let k = loss.k();
    let nature = nature_two_block(&subset, &unit_vector(major, k)?, &unit_vector(minor, k)?)?;
    Ok((nature, subset, LossConflictTypes { major, minor, swapped }))
}
