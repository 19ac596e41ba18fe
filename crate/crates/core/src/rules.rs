//! Decision rules: construction, affineness and Lipschitz analysis,
//! loss-minimizing rules, instantiation and composition.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dec;
use crate::domain::{Assignment, Predictor, VectorTable};
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::metrics::ActionFunction;
use crate::rng::RandomStream;
use crate::simplex::{sample_type_at, unit_vector};

/// Resolution used when a custom rule is written out as a grid table.
pub const TABLE_RESOLUTION: usize = 10;

type RuleFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The concrete form of a rule.
#[derive(Clone)]
pub enum RuleKind {
    /// Instantiate-then-act with per-type acceptance `g`.
    Ita { g: Vec<f64> },
    /// Accept with the probability that the sampled rank is at most `cutoff`.
    Threshold { cutoff: usize },
    /// `rho*_l`: accept iff expected loss of accepting is strictly smaller.
    LossMin { loss: LossFunction },
    /// Accept iff `y[coordinate] >= level`.
    Step { coordinate: usize, level: f64 },
    Constant { p: f64 },
    /// Values on the step-`1/m` simplex grid, evaluated at the nearest grid point.
    Table { m: usize, values: BTreeMap<Vec<usize>, f64> },
    Custom { name: String, f: RuleFn },
}

impl fmt::Debug for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Ita { g } => write!(f, "Ita({g:?})"),
            RuleKind::Threshold { cutoff } => write!(f, "Threshold({cutoff})"),
            RuleKind::LossMin { loss } => write!(f, "LossMin({:?})", loss.table()),
            RuleKind::Step { coordinate, level } => write!(f, "Step({coordinate}, {level})"),
            RuleKind::Constant { p } => write!(f, "Constant({p})"),
            RuleKind::Table { m, .. } => write!(f, "Table(m={m})"),
            RuleKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A map from stochastic vectors to acceptance probabilities.
#[derive(Debug, Clone)]
pub struct DecisionRule {
    k: usize,
    kind: RuleKind,
}

impl DecisionRule {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn threshold(k: usize, cutoff: usize) -> Result<Self> {
        if cutoff > k {
            return Err(Error::InvalidRule(format!("cutoff {cutoff} > k {k}")));
        }
        Ok(Self { k, kind: RuleKind::Threshold { cutoff } })
    }

    pub fn step(k: usize, coordinate: usize, level: f64) -> Result<Self> {
        if coordinate >= k || !level.is_finite() {
            return Err(Error::InvalidRule("step coordinate or level invalid".into()));
        }
        Ok(Self { k, kind: RuleKind::Step { coordinate, level } })
    }

    pub fn constant(k: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidRule(format!("constant {p} outside [0,1]")));
        }
        Ok(Self { k, kind: RuleKind::Constant { p } })
    }

    /// Wrap an arbitrary acceptance function; values must lie in [0,1].
    pub fn custom(k: usize, name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { k, kind: RuleKind::Custom { name: name.into(), f: Arc::new(f) } }
    }

    /// `E[rho(y)]`.
    pub fn accept(&self, y: &[f64]) -> f64 {
        match &self.kind {
            RuleKind::Ita { g } => y.iter().zip(g).map(|(a, b)| a * b).sum(),
            RuleKind::Threshold { cutoff } => y[..*cutoff].iter().sum::<f64>().min(1.0),
            RuleKind::LossMin { loss } => {
                let d: f64 = y.iter().enumerate().map(|(t, v)| v * loss.gap(t)).sum();
                if d < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            RuleKind::Step { coordinate, level } => (y[*coordinate] >= *level) as u8 as f64,
            RuleKind::Constant { p } => *p,
            RuleKind::Table { m, values } => *values.get(&nearest_grid_point(y, *m)).unwrap_or(&0.0),
            RuleKind::Custom { f, .. } => f(y),
        }
    }

    /// Whether the rule is affine by construction.
    pub fn is_ita(&self) -> bool {
        matches!(self.kind, RuleKind::Ita { .. } | RuleKind::Threshold { .. } | RuleKind::Constant { .. })
    }

    /// Tabulate the rule on the step-`1/m` simplex grid.
    pub fn to_table(&self, m: usize) -> Self {
        let values = simplex_grid_counts(self.k, m)
            .into_iter()
            .map(|c| {
                let y: Vec<f64> = c.iter().map(|&n| n as f64 / m as f64).collect();
                (c, self.accept(&y))
            })
            .collect();
        Self { k: self.k, kind: RuleKind::Table { m, values } }
    }
}

/// Serialized form of a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleDoc {
    Ita {
        #[serde(serialize_with = "dec::ser_vec", deserialize_with = "dec::de_vec")]
        g: Vec<f64>,
    },
    Threshold { k: usize, cutoff: usize },
    LossMin { loss: LossFunction },
    Step {
        k: usize,
        coordinate: usize,
        #[serde(serialize_with = "dec::ser_f64", deserialize_with = "dec::de_f64")]
        level: f64,
    },
    Constant {
        k: usize,
        #[serde(serialize_with = "dec::ser_f64", deserialize_with = "dec::de_f64")]
        p: f64,
    },
    Table {
        k: usize,
        m: usize,
        points: Vec<Vec<usize>>,
        #[serde(serialize_with = "dec::ser_vec", deserialize_with = "dec::de_vec")]
        values: Vec<f64>,
        #[serde(default)]
        note: String,
    },
}

const TABLE_NOTE: &str = "values on the step-1/m simplex grid given as counts out of m; off-grid inputs use the nearest grid point";

impl DecisionRule {
    pub fn to_doc(&self) -> RuleDoc {
        match &self.kind {
            RuleKind::Ita { g } => RuleDoc::Ita { g: g.clone() },
            RuleKind::Threshold { cutoff } => RuleDoc::Threshold { k: self.k, cutoff: *cutoff },
            RuleKind::LossMin { loss } => RuleDoc::LossMin { loss: loss.clone() },
            RuleKind::Step { coordinate, level } => RuleDoc::Step { k: self.k, coordinate: *coordinate, level: *level },
            RuleKind::Constant { p } => RuleDoc::Constant { k: self.k, p: *p },
            RuleKind::Table { m, values } => RuleDoc::Table {
                k: self.k,
                m: *m,
                points: values.keys().cloned().collect(),
                values: values.values().cloned().collect(),
                note: TABLE_NOTE.into(),
            },
            RuleKind::Custom { .. } => self.to_table(TABLE_RESOLUTION).to_doc(),
        }
    }

    pub fn from_doc(doc: RuleDoc) -> Result<Self> {
        match doc {
            RuleDoc::Ita { g } => ita_rule(&g),
            RuleDoc::Threshold { k, cutoff } => Self::threshold(k, cutoff),
            RuleDoc::LossMin { loss } => Ok(loss_min_rule(&loss)),
            RuleDoc::Step { k, coordinate, level } => Self::step(k, coordinate, level),
            RuleDoc::Constant { k, p } => Self::constant(k, p),
            RuleDoc::Table { k, m, points, values, .. } => {
                if points.len() != values.len() || m == 0 {
                    return Err(Error::InvalidRule("table points and values differ in length".into()));
                }
                if points.iter().any(|p| p.len() != k || p.iter().sum::<usize>() != m) {
                    return Err(Error::InvalidRule("table point is not on the grid".into()));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidRule("table value outside [0,1]".into()));
                }
                Ok(Self { k, kind: RuleKind::Table { m, values: points.into_iter().zip(values).collect() } })
            }
        }
    }
}

impl Serialize for DecisionRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DecisionRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = RuleDoc::deserialize(d)?;
        Self::from_doc(doc).map_err(serde::de::Error::custom)
    }
}

/// Instantiate-then-act rule `y -> sum_t y_t g(t)`.
pub fn ita_rule(g: &[f64]) -> Result<DecisionRule> {
    if g.len() < 2 {
        return Err(Error::InvalidRule("need at least two types".into()));
    }
    if g.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidRule("g must lie in [0,1]".into()));
    }
    Ok(DecisionRule { k: g.len(), kind: RuleKind::Ita { g: g.to_vec() } })
}

/// The ITA rule agreeing with `rule` on unit vectors.
pub fn affine_projection(rule: &DecisionRule) -> DecisionRule {
    let g = (0..rule.k).map(|t| rule.accept(unit_vector(t, rule.k).unwrap().as_slice())).collect();
    DecisionRule { k: rule.k, kind: RuleKind::Ita { g } }
}

/// `rho*_l`, rejecting on ties.
pub fn loss_min_rule(loss: &LossFunction) -> DecisionRule {
    DecisionRule { k: loss.k(), kind: RuleKind::LossMin { loss: loss.clone() } }
}

/// ITA rule with `g(t) = rho*_l(e_t)`.
pub fn mac_rule(loss: &LossFunction) -> DecisionRule {
    affine_projection(&loss_min_rule(loss))
}

/// `|rho(gamma y + (1-gamma) y') - gamma rho(y) - (1-gamma) rho(y')|`.
pub fn affine_violation(rule: &DecisionRule, y: &[f64], y2: &[f64], gamma: f64) -> f64 {
    let mid: Vec<f64> = y.iter().zip(y2).map(|(a, b)| gamma * a + (1.0 - gamma) * b).collect();
    (rule.accept(&mid) - gamma * rule.accept(y) - (1.0 - gamma) * rule.accept(y2)).abs()
}

/// Probe pair and mixing weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineWitness {
    #[serde(serialize_with = "dec::ser_vec", deserialize_with = "dec::de_vec")]
    pub y: Vec<f64>,
    #[serde(serialize_with = "dec::ser_vec", deserialize_with = "dec::de_vec")]
    pub y_prime: Vec<f64>,
    #[serde(serialize_with = "dec::ser_f64", deserialize_with = "dec::de_f64")]
    pub gamma: f64,
}

impl AffineWitness {
    pub fn violation(&self, rule: &DecisionRule) -> f64 {
        affine_violation(rule, &self.y, &self.y_prime, self.gamma)
    }

    /// `(e_a, e_b, 1/2)`.
    pub fn unit_pair(a: usize, b: usize, k: usize) -> Result<Self> {
        Ok(Self { y: unit_vector(a, k)?.into_vec(), y_prime: unit_vector(b, k)?.into_vec(), gamma: 0.5 })
    }
}

/// Lower bound on the distance of a rule from the affine rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinenessCertificate {
    #[serde(serialize_with = "dec::ser_f64", deserialize_with = "dec::de_f64")]
    pub epsilon: f64,
    pub witness: AffineWitness,
    pub resolution: usize,
}

impl AffinenessCertificate {
    /// Replaying the witness reproduces the certified violation.
    pub fn replays(&self, rule: &DecisionRule) -> bool {
        self.witness.violation(rule) >= self.epsilon - 1e-9
    }
}

/// All compositions of `m` into `k` nonnegative parts, lexicographic order.
pub fn simplex_grid_counts(k: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(k, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, &mut Vec::with_capacity(k), &mut out);
    out
}

pub fn simplex_grid(k: usize, m: usize) -> Vec<Vec<f64>> {
    simplex_grid_counts(k, m)
        .into_iter()
        .map(|c| c.into_iter().map(|n| n as f64 / m as f64).collect())
        .collect()
}

/// Rounds `y * m` to integer counts summing to `m` (largest remainder).
fn nearest_grid_point(y: &[f64], m: usize) -> Vec<usize> {
    let scaled: Vec<f64> = y.iter().map(|v| v.max(0.0) * m as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|v| v.floor() as usize).collect();
    let used: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).partial_cmp(&(scaled[a] - scaled[a].floor())).unwrap().then(a.cmp(&b)));
    for &i in order.iter().take(m.saturating_sub(used)) {
        counts[i] += 1;
    }
    counts
}

fn probe_points(k: usize, m: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = (0..k).map(|t| unit_vector(t, k).unwrap().into_vec()).collect();
    if k <= 4 {
        pts.extend(simplex_grid(k, m).into_iter().filter(|p| !p.contains(&1.0)));
    }
    pts
}

fn random_simplex_point<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Probe pairs: grid (k <= 4) or seeded random pairs (k > 4), plus all unit pairs.
fn probe_pairs(k: usize, m: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let pts = probe_points(k, m);
    let mut pairs = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            pairs.push((pts[i].clone(), pts[j].clone()));
        }
    }
    if k > 4 {
        let mut rng = RandomStream::new(0xAFF1).derive("affine-probes").rng();
        for _ in 0..10 * m * m {
            pairs.push((random_simplex_point(k, &mut rng), random_simplex_point(k, &mut rng)));
        }
    }
    pairs
}

fn mixing_weights(m: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (1..m).map(|i| i as f64 / m as f64).collect();
    if m % 2 == 1 {
        g.push(0.5);
    }
    g
}

/// Grid search for the largest affineness violation.
pub fn affineness_distance(rule: &DecisionRule, m: usize) -> Result<AffinenessCertificate> {
    if m < 2 {
        return Err(Error::InvalidRule(format!("resolution {m} < 2")));
    }
    let pairs = probe_pairs(rule.k, m);
    let gammas = mixing_weights(m);
    let best = pairs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, (y, y2))| gammas.iter().enumerate().map(move |(j, &g)| (affine_violation(rule, y, y2, g), i, j)))
        .reduce(
            || (-1.0, usize::MAX, usize::MAX),
            |a, b| {
                if a.0 > b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2)) {
                    a
                } else {
                    b
                }
            },
        );
    let (eps, i, j) = best;
    let (y, y2) = pairs[i].clone();
    Ok(AffinenessCertificate { epsilon: eps, witness: AffineWitness { y, y_prime: y2, gamma: gammas[j] }, resolution: m })
}

/// Result of a Lipschitz probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lipschitz {
    Finite(f64),
    /// A jump persists under bisection down to distance 1e-12.
    NoFiniteCertificate,
}

impl Lipschitz {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Lipschitz::Finite(m) => Some(*m),
            Lipschitz::NoFiniteCertificate => None,
        }
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn jump_persists(rule: &DecisionRule, a: &[f64], b: &[f64]) -> bool {
    let jump = (rule.accept(a) - rule.accept(b)).abs();
    if jump < 1e-9 {
        return false;
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    while sup_dist(&a, &b) > 1e-12 {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (fa, fm, fb) = (rule.accept(&a), rule.accept(&mid), rule.accept(&b));
        if (fa - fm).abs() >= (fm - fb).abs() {
            b = mid;
        } else {
            a = mid;
        }
        if (rule.accept(&a) - rule.accept(&b)).abs() < jump / 4.0 {
            return false;
        }
    }
    true
}

/// Largest probed ratio `|rho(y) - rho(y')| / ||y - y'||_inf`, or a discontinuity flag.
pub fn lipschitz_estimate(rule: &DecisionRule, m: usize) -> Result<Lipschitz> {
    if m < 2 {
        return Err(Error::InvalidRule(format!("resolution {m} < 2")));
    }
    let pairs = probe_pairs(rule.k, m);
    let stats: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|(a, b)| {
            let j = (rule.accept(a) - rule.accept(b)).abs();
            (j / sup_dist(a, b), j)
        })
        .collect();
    let mut best = 0.0f64;
    let mut best_i = 0;
    let mut jump_i = 0;
    for (i, &(r, j)) in stats.iter().enumerate() {
        if r > best {
            best = r;
            best_i = i;
        }
        if j > stats[jump_i].1 {
            jump_i = i;
        }
    }
    let k = rule.k;
    let mut suspects = vec![best_i, jump_i];
    suspects.extend(0..(k * (k - 1) / 2).min(pairs.len()));
    if suspects.into_iter().any(|i| jump_persists(rule, &pairs[i].0, &pairs[i].1)) {
        return Ok(Lipschitz::NoFiniteCertificate);
    }
    Ok(Lipschitz::Finite(best))
}

/// `x -> rule.accept(pred(x))`.
pub fn compose<A: Assignment + ?Sized>(rule: &DecisionRule, pred: &A) -> ActionFunction {
    ActionFunction::from_unchecked((0..pred.len()).map(|x| rule.accept(pred.at(x))).collect())
}

/// One type per element drawn from its predicted distribution.
pub fn random_instantiation<A: Assignment + ?Sized>(pred: &A, stream: &RandomStream) -> Predictor {
    let k = pred.k();
    let mut data = vec![0.0; pred.len() * k];
    for x in 0..pred.len() {
        data[x * k + sample_type_at(pred.at(x), stream, x as u64)] = 1.0;
    }
    Predictor::from_table(VectorTable::from_raw(k, data))
}
