//! Exact auditors for accuracy, calibration, decision and loss notions.
//!
//! Every gap is signed as reference minus candidate (nature minus predictor,
//! or `h*_l` minus `h`). The headline number is the largest absolute gap.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Discretization, Group, GroupCollection, Nature, Population};
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::rng::RandomStream;
use crate::rules::{compose, loss_min_rule, DecisionRule};
use crate::simplex::sample_type_at;

/// Acceptance probability per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFunction {
    #[serde(serialize_with = "crate::dec::ser_vec", deserialize_with = "crate::dec::de_vec")]
    accept: Vec<f64>,
}

impl ActionFunction {
    pub fn new(accept: Vec<f64>) -> Result<Self> {
        if accept.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidRule("acceptance outside [0,1]".into()));
        }
        Ok(Self { accept })
    }

    pub(crate) fn from_unchecked(accept: Vec<f64>) -> Self {
        Self { accept }
    }

    pub fn constant(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    /// Accept exactly the members of `g`.
    pub fn indicator(n: usize, g: &Group) -> Self {
        let mut a = vec![0.0; n];
        for &x in g.members() {
            a[x] = 1.0;
        }
        Self { accept: a }
    }

    pub fn values(&self) -> &[f64] {
        &self.accept
    }

    pub fn len(&self) -> usize {
        self.accept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accept.is_empty()
    }
}

/// Which coordinate statistic a constraint tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Slice {
    /// Mass of type `t`.
    Type(usize),
    /// Mass of ranks strictly worse than `tau` (0-based indices `>= tau`).
    Above(usize),
}

impl Slice {
    pub fn coords(&self, k: usize) -> std::ops::Range<usize> {
        match *self {
            Slice::Type(t) => t..t + 1,
            Slice::Above(tau) => tau..k,
        }
    }
}

/// One audited constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub group: String,
    #[serde(skip)]
    pub group_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<Slice>,
    /// Grid centers of the level set (one for coordinate-wise, k for full cells).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub constraint: Constraint,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMass {
    pub group: String,
    pub mass: f64,
}

/// Worst-case gap with witness and the full signed table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub metric: String,
    pub max_gap: f64,
    pub witness: Option<Constraint>,
    pub entries: Vec<GapEntry>,
    pub group_mass: Vec<GroupMass>,
}

impl AuditReport {
    fn build(metric: &str, pop: &Population, c: &GroupCollection, entries: Vec<GapEntry>) -> Self {
        let max_gap = entries.iter().map(|e| e.gap.abs()).fold(0.0, f64::max);
        let witness = entries.iter().find(|e| e.gap.abs() == max_gap).map(|e| e.constraint.clone());
        let group_mass = c.groups().iter().map(|g| GroupMass { group: g.id.clone(), mass: pop.mass(g.members()) }).collect();
        Self { metric: metric.into(), max_gap, witness, entries, group_mass }
    }

    /// First entry (canonical order) with the largest `|gap|` above `alpha`.
    pub fn violation(&self, alpha: f64) -> Option<&GapEntry> {
        let mut best: Option<&GapEntry> = None;
        for e in &self.entries {
            if e.gap.abs() > alpha && best.is_none_or(|b| e.gap.abs() > b.gap.abs()) {
                best = Some(e);
            }
        }
        best
    }

    pub fn mass_of(&self, group: &str) -> Option<f64> {
        self.group_mass.iter().find(|g| g.group == group).map(|g| g.mass)
    }

    /// Largest `|gap|` among entries of one group.
    pub fn group_max(&self, group: &str) -> f64 {
        self.entries.iter().filter(|e| e.constraint.group == group).map(|e| e.gap.abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `group,slice,index,cell,gap`.
    pub fn write_csv<W: std::io::Write>(&self, w: W, fmt: impl Fn(f64) -> String) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["group", "slice", "index", "cell", "gap"])?;
        for e in &self.entries {
            let (kind, idx) = match e.constraint.slice {
                Some(Slice::Type(t)) => ("type", t.to_string()),
                Some(Slice::Above(t)) => ("threshold", t.to_string()),
                None => ("", String::new()),
            };
            let cell = e.constraint.cell.as_ref().map(|c| c.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(";")).unwrap_or_default();
            wr.write_record([e.constraint.group.as_str(), kind, &idx, &cell, &fmt(e.gap)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn check_sizes<A: Assignment + ?Sized, B: Assignment + ?Sized>(pop: &Population, a: &A, b: &B) -> Result<()> {
    if a.len() != pop.size() || b.len() != pop.size() {
        return Err(Error::Dimension { expected: pop.size(), got: a.len().min(b.len()) });
    }
    if a.k() != b.k() {
        return Err(Error::Dimension { expected: a.k(), got: b.k() });
    }
    Ok(())
}

/// `Pr_{x ~ D}[x in S, t ~ R(x) equals t]`.
pub fn joint_mass<A: Assignment + ?Sized>(pop: &Population, r: &A, s: &Group, t: usize) -> f64 {
    s.members().iter().map(|&x| pop.weight(x) * r.at(x)[t]).sum()
}

/// Accuracy statistic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaMode {
    CoordinateWise,
    Threshold,
}

impl MaMode {
    pub fn slices(&self, k: usize) -> Vec<Slice> {
        match self {
            MaMode::CoordinateWise => (0..k).map(Slice::Type).collect(),
            MaMode::Threshold => (1..k).map(Slice::Above).collect(),
        }
    }
}

fn slice_value(row: &[f64], s: Slice) -> f64 {
    row[s.coords(row.len())].iter().sum()
}

/// Multi-accuracy audit (coordinate-wise or threshold).
pub fn ma_error<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, c: &GroupCollection, mode: MaMode) -> Result<AuditReport> {
    check_sizes(pop, nature, pred)?;
    let slices = mode.slices(nature.k());
    let mut entries = Vec::new();
    for (gi, g) in c.groups().iter().enumerate() {
        let mut acc = vec![0.0; slices.len()];
        for &x in g.members() {
            let w = pop.weight(x);
            if w == 0.0 {
                continue;
            }
            let (n, p) = (nature.at(x), pred.at(x));
            for (a, &s) in acc.iter_mut().zip(&slices) {
                *a += w * (slice_value(n, s) - slice_value(p, s));
            }
        }
        for (a, &s) in acc.into_iter().zip(&slices) {
            entries.push(GapEntry { constraint: Constraint { group: g.id.clone(), group_index: gi, slice: Some(s), cell: None }, gap: a });
        }
    }
    let name = match mode {
        MaMode::CoordinateWise => "ma_cw",
        MaMode::Threshold => "ma_threshold",
    };
    Ok(AuditReport::build(name, pop, c, entries))
}

/// Coordinate-wise multi-calibration audit over level sets `S_{t,beta}`.
pub fn mc_cw_error<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, c: &GroupCollection, d: &Discretization) -> Result<AuditReport> {
    check_sizes(pop, nature, pred)?;
    let k = nature.k();
    let b = d.bins();
    let mut entries = Vec::new();
    let mut acc = vec![0.0; k * b];
    let mut seen = vec![false; k * b];
    for (gi, g) in c.groups().iter().enumerate() {
        acc.iter_mut().for_each(|v| *v = 0.0);
        seen.iter_mut().for_each(|v| *v = false);
        for &x in g.members() {
            let w = pop.weight(x);
            let (n, p) = (nature.at(x), pred.at(x));
            for t in 0..k {
                let i = t * b + d.index(p[t]);
                seen[i] = true;
                acc[i] += w * (n[t] - p[t]);
            }
        }
        for t in 0..k {
            for j in 0..b {
                if seen[t * b + j] {
                    entries.push(GapEntry {
                        constraint: Constraint { group: g.id.clone(), group_index: gi, slice: Some(Slice::Type(t)), cell: Some(vec![d.center(j)]) },
                        gap: acc[t * b + j],
                    });
                }
            }
        }
    }
    Ok(AuditReport::build("mc_cw", pop, c, entries))
}

/// Realized full cells of `pred` within `g`, keyed by bin indices.
pub fn realized_cells<A: Assignment + ?Sized>(pred: &A, g: &Group, d: &Discretization) -> BTreeMap<Vec<usize>, Vec<usize>> {
    let mut cells: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for &x in g.members() {
        cells.entry(d.cell(pred.at(x))).or_default().push(x);
    }
    cells
}

/// Full multi-calibration audit over realized cells `S_R`.
pub fn mc_full_error<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, c: &GroupCollection, d: &Discretization) -> Result<AuditReport> {
    check_sizes(pop, nature, pred)?;
    let k = nature.k();
    let mut entries = Vec::new();
    for (gi, g) in c.groups().iter().enumerate() {
        let cells = realized_cells(pred, g, d);
        let gaps: Vec<(Vec<f64>, Vec<f64>)> = cells
            .iter()
            .map(|(key, xs)| {
                let mut acc = vec![0.0; k];
                for &x in xs {
                    let w = pop.weight(x);
                    let (n, p) = (nature.at(x), pred.at(x));
                    for t in 0..k {
                        acc[t] += w * (n[t] - p[t]);
                    }
                }
                (key.iter().map(|&i| d.center(i)).collect(), acc)
            })
            .collect();
        for t in 0..k {
            for (centers, acc) in &gaps {
                entries.push(GapEntry {
                    constraint: Constraint { group: g.id.clone(), group_index: gi, slice: Some(Slice::Type(t)), cell: Some(centers.clone()) },
                    gap: acc[t],
                });
            }
        }
    }
    Ok(AuditReport::build("mc_full", pop, c, entries))
}

fn conditional_gaps(metric: &str, pop: &Population, c: &GroupCollection, reference: &[f64], candidate: &[f64]) -> Result<AuditReport> {
    let mut entries = Vec::new();
    for (gi, g) in c.groups().iter().enumerate() {
        let delta = pop.mass(g.members());
        if delta <= 0.0 {
            return Err(Error::ZeroMass(g.id.clone()));
        }
        let diff: f64 = g.members().iter().map(|&x| pop.weight(x) * (reference[x] - candidate[x])).sum();
        entries.push(GapEntry { constraint: Constraint { group: g.id.clone(), group_index: gi, slice: None, cell: None }, gap: diff / delta });
    }
    Ok(AuditReport::build(metric, pop, c, entries))
}

/// Multi-accuracy-on-decision: `E[rho(R*)|S] - E[rho(R~)|S]` per group.
pub fn mad_error<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, rule: &DecisionRule, c: &GroupCollection) -> Result<AuditReport> {
    check_sizes(pop, nature, pred)?;
    let on_nature = compose(rule, nature);
    let on_pred = compose(rule, pred);
    conditional_gaps("mad", pop, c, on_nature.values(), on_pred.values())
}

/// `E_{x ~ D, t ~ R*(x), a ~ h(x)}[l(t, a)]`.
pub fn exp_loss(pop: &Population, nature: &Nature, h: &ActionFunction, loss: &LossFunction) -> Result<f64> {
    if h.len() != pop.size() || nature.len() != pop.size() {
        return Err(Error::Dimension { expected: pop.size(), got: h.len() });
    }
    if loss.k() != nature.k() {
        return Err(Error::Dimension { expected: nature.k(), got: loss.k() });
    }
    let mut total = 0.0;
    for x in 0..pop.size() {
        let (a, row) = (h.values()[x], nature.at(x));
        let inner: f64 = row.iter().enumerate().map(|(t, p)| p * (a * loss.value(t, 1) + (1.0 - a) * loss.value(t, 0))).sum();
        total += pop.weight(x) * inner;
    }
    Ok(total)
}

/// Multi-accuracy-on-classification: `E[h*_l|S] - E[h|S]` per group.
pub fn mac_error(pop: &Population, nature: &Nature, h: &ActionFunction, loss: &LossFunction, c: &GroupCollection) -> Result<AuditReport> {
    if h.len() != pop.size() {
        return Err(Error::Dimension { expected: pop.size(), got: h.len() });
    }
    let star = compose(&loss_min_rule(loss), nature);
    conditional_gaps("mac", pop, c, star.values(), h.values())
}

/// `exp_loss(h) - min_{h' in H} exp_loss(h')`.
pub fn loss_gap(pop: &Population, nature: &Nature, h: &ActionFunction, loss: &LossFunction, hs: &[ActionFunction]) -> Result<f64> {
    if hs.is_empty() {
        return Err(Error::Config("benchmark class H is empty".into()));
    }
    let mut best = f64::INFINITY;
    for b in hs {
        best = best.min(exp_loss(pop, nature, b, loss)?);
    }
    Ok(exp_loss(pop, nature, h, loss)? - best)
}

/// Samples needed so every one of `constraints` estimates (range 2) is within
/// `eps` with probability `1 - delta` (Hoeffding plus union bound).
pub fn hoeffding_samples(eps: f64, delta: f64, constraints: usize) -> usize {
    (2.0 * (2.0 * constraints.max(1) as f64 / delta).ln() / (eps * eps)).ceil() as usize
}

/// Sampling estimate of the multi-accuracy table. Demonstration only; audits
/// and learners always use the exact enumeration.
pub fn sampled_ma_error<A: Assignment + ?Sized>(
    pop: &Population,
    nature: &Nature,
    pred: &A,
    c: &GroupCollection,
    mode: MaMode,
    samples: usize,
    stream: &RandomStream,
) -> Result<AuditReport> {
    check_sizes(pop, nature, pred)?;
    let k = nature.k();
    let slices = mode.slices(k);
    let masks: Vec<Vec<bool>> = c.groups().iter().map(|g| g.mask(pop.size())).collect();
    let mut cdf = Vec::with_capacity(pop.size());
    let mut acc = 0.0;
    for &w in pop.weights() {
        acc += w;
        cdf.push(acc);
    }
    let (sx, sn, sp) = (stream.derive("x"), stream.derive("nature"), stream.derive("pred"));
    let mut sums = vec![0.0; c.len() * slices.len()];
    for i in 0..samples as u64 {
        let u = sx.uniform_at(i) * acc;
        let x = cdf.partition_point(|&v| v <= u).min(pop.size() - 1);
        let tn = sample_type_at(nature.at(x), &sn, i);
        let tp = sample_type_at(pred.at(x), &sp, i);
        for (gi, m) in masks.iter().enumerate() {
            if m[x] {
                for (si, s) in slices.iter().enumerate() {
                    let r = s.coords(k);
                    sums[gi * slices.len() + si] += r.contains(&tn) as u8 as f64 - r.contains(&tp) as u8 as f64;
                }
            }
        }
    }
    let mut entries = Vec::new();
    for (gi, g) in c.groups().iter().enumerate() {
        for (si, &s) in slices.iter().enumerate() {
            entries.push(GapEntry {
                constraint: Constraint { group: g.id.clone(), group_index: gi, slice: Some(s), cell: None },
                gap: sums[gi * slices.len() + si] / samples as f64,
            });
        }
    }
    Ok(AuditReport::build("ma_sampled", pop, c, entries))
}
