//! Populations, type spaces, natures, predictors, groups and discretizations.

use serde::{Deserialize, Serialize};

use crate::dec;
use crate::error::{Error, Result};
use crate::simplex::{check_entries, StochasticVector, SIMPLEX_TOL};

/// A finite weighted domain `0..size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PopulationDoc", into = "PopulationDoc")]
pub struct Population {
    weights: Vec<f64>,
    uniform: bool,
}

#[derive(Serialize, Deserialize)]
struct PopulationDoc {
    size: usize,
    #[serde(serialize_with = "dec::ser_vec", deserialize_with = "dec::de_vec")]
    weights: Vec<f64>,
}

impl TryFrom<PopulationDoc> for Population {
    type Error = Error;
    fn try_from(d: PopulationDoc) -> Result<Self> {
        if d.weights.len() != d.size {
            return Err(Error::InvalidPopulation(format!("{} weights for size {}", d.weights.len(), d.size)));
        }
        Population::weighted(d.weights)
    }
}

impl From<Population> for PopulationDoc {
    fn from(p: Population) -> Self {
        PopulationDoc { size: p.size(), weights: p.weights }
    }
}

impl Population {
    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidPopulation("size must be at least 1".into()));
        }
        Ok(Self { weights: vec![1.0 / size as f64; size], uniform: true })
    }

    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPopulation("size must be at least 1".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPopulation("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidPopulation(format!("weights sum to {s}")));
        }
        let uniform = weights.iter().all(|w| *w == weights[0]);
        Ok(Self { weights, uniform })
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Bit length of the index encoding of elements.
    pub fn bit_width(&self) -> usize {
        let n = self.size();
        if n <= 1 {
            1
        } else {
            (usize::BITS - (n - 1).leading_zeros()) as usize
        }
    }

    /// The feature string of `x`: its binary index, most significant bit first.
    pub fn encode(&self, x: usize) -> String {
        format!("{:0width$b}", x, width = self.bit_width())
    }

    /// Total weight of a member list.
    pub fn mass(&self, members: &[usize]) -> f64 {
        members.iter().map(|&x| self.weights[x]).sum()
    }
}

/// The label space `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSpace {
    pub k: usize,
    #[serde(default)]
    pub ordered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_dec")]
    pub values: Option<Vec<f64>>,
}

mod opt_dec {
    use super::dec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => dec::ser_vec(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let raw = Option::<Vec<String>>::deserialize(d)?;
        raw.map(|r| r.iter().map(|s| dec::decode(s)).collect()).transpose()
    }
}

impl TypeSpace {
    pub fn new(k: usize) -> Result<Self> {
        Self { k, ordered: false, values: None }.validated()
    }

    pub fn ordered(k: usize) -> Result<Self> {
        Self { k, ordered: true, values: None }.validated()
    }

    /// Numeric types placed on the centers of the `1/k` grid.
    pub fn numeric_grid(k: usize) -> Result<Self> {
        let values = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
        Self::numeric(values)
    }

    pub fn numeric(values: Vec<f64>) -> Result<Self> {
        Self { k: values.len(), ordered: true, values: Some(values) }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.k < 2 {
            return Err(Error::InvalidTypeSpace(format!("k = {} < 2", self.k)));
        }
        if let Some(v) = &self.values {
            if v.len() != self.k {
                return Err(Error::InvalidTypeSpace("value count differs from k".into()));
            }
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidTypeSpace("values must be strictly increasing in [0,1]".into()));
            }
        }
        Ok(self)
    }
}

/// Dense row-major table of stochastic vectors, one row per element.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    k: usize,
    data: Vec<f64>,
}

impl VectorTable {
    pub fn from_rows(k: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * k);
        for r in rows {
            if r.len() != k {
                return Err(Error::Dimension { expected: k, got: r.len() });
            }
            check_entries(r)?;
            data.extend_from_slice(r);
        }
        Ok(Self { k, data })
    }

    pub fn constant(n: usize, y: &[f64]) -> Self {
        Self { k: y.len(), data: y.repeat(n) }
    }

    pub(crate) fn from_raw(k: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % k, 0);
        Self { k, data }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.k..(x + 1) * self.k]
    }

    pub(crate) fn row_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.data[x * self.k..(x + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.k)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }
}

/// Anything that assigns a stochastic vector to each element.
pub trait Assignment {
    fn table(&self) -> &VectorTable;

    fn k(&self) -> usize {
        self.table().k()
    }

    fn len(&self) -> usize {
        self.table().len()
    }

    fn is_empty(&self) -> bool {
        self.table().is_empty()
    }

    fn at(&self, x: usize) -> &[f64] {
        self.table().row(x)
    }
}

/// Ground truth `R*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NatureDoc", into = "NatureDoc")]
pub struct Nature {
    types: TypeSpace,
    table: VectorTable,
    deterministic: bool,
}

#[derive(Serialize, Deserialize)]
struct NatureDoc {
    types: TypeSpace,
    deterministic: bool,
    #[serde(serialize_with = "dec::ser_rows", deserialize_with = "dec::de_rows")]
    rows: Vec<Vec<f64>>,
}

impl TryFrom<NatureDoc> for Nature {
    type Error = Error;
    fn try_from(d: NatureDoc) -> Result<Self> {
        let n = Nature::new(d.types, &d.rows)?;
        if n.deterministic != d.deterministic {
            return Err(Error::InvalidVector("deterministic flag disagrees with rows".into()));
        }
        Ok(n)
    }
}

impl From<Nature> for NatureDoc {
    fn from(n: Nature) -> Self {
        NatureDoc { rows: n.table.to_rows(), types: n.types, deterministic: n.deterministic }
    }
}

fn all_point_masses(t: &VectorTable) -> bool {
    t.rows().all(|r| r.contains(&1.0))
}

impl Nature {
    pub fn new(types: TypeSpace, rows: &[Vec<f64>]) -> Result<Self> {
        let table = VectorTable::from_rows(types.k, rows)?;
        Ok(Self::from_table(types, table))
    }

    pub fn from_table(types: TypeSpace, table: VectorTable) -> Self {
        let deterministic = all_point_masses(&table);
        Self { types, table, deterministic }
    }

    /// Deterministic nature from a type label per element.
    pub fn from_labels(types: TypeSpace, labels: &[usize]) -> Result<Self> {
        let k = types.k;
        let mut data = vec![0.0; labels.len() * k];
        for (x, &t) in labels.iter().enumerate() {
            if t >= k {
                return Err(Error::IndexOutOfRange { index: t, size: k });
            }
            data[x * k + t] = 1.0;
        }
        Ok(Self::from_table(types, VectorTable::from_raw(k, data)))
    }

    pub fn types(&self) -> &TypeSpace {
        &self.types
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    /// The realized type of each element, when deterministic.
    pub fn labels(&self) -> Option<Vec<usize>> {
        self.deterministic
            .then(|| self.table.rows().map(|r| r.iter().position(|&v| v == 1.0).unwrap()).collect())
    }

    pub fn as_predictor(&self) -> Predictor {
        Predictor { table: self.table.clone() }
    }
}

impl Assignment for Nature {
    fn table(&self) -> &VectorTable {
        &self.table
    }
}

/// A probabilistic predictor `R~`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PredictorDoc", into = "PredictorDoc")]
pub struct Predictor {
    table: VectorTable,
}

#[derive(Serialize, Deserialize)]
struct PredictorDoc {
    k: usize,
    #[serde(serialize_with = "dec::ser_rows", deserialize_with = "dec::de_rows")]
    rows: Vec<Vec<f64>>,
}

impl TryFrom<PredictorDoc> for Predictor {
    type Error = Error;
    fn try_from(d: PredictorDoc) -> Result<Self> {
        Predictor::new(d.k, &d.rows)
    }
}

impl From<Predictor> for PredictorDoc {
    fn from(p: Predictor) -> Self {
        PredictorDoc { k: p.table.k(), rows: p.table.to_rows() }
    }
}

impl Predictor {
    pub fn new(k: usize, rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self { table: VectorTable::from_rows(k, rows)? })
    }

    pub fn constant(n: usize, y: &StochasticVector) -> Self {
        Self { table: VectorTable::constant(n, y.as_slice()) }
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self::constant(n, &StochasticVector::uniform(k))
    }

    pub fn from_table(table: VectorTable) -> Self {
        Self { table }
    }

    pub(crate) fn table_mut(&mut self) -> &mut VectorTable {
        &mut self.table
    }

    /// Predictor-as-nature view (for metrics that only need rows).
    pub fn to_nature(&self, types: TypeSpace) -> Nature {
        Nature::from_table(types, self.table.clone())
    }

    /// Writes `element,p0,...,p{k-1}` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["element".to_string()];
        header.extend((0..self.k()).map(|t| format!("p{t}")));
        wr.write_record(&header)?;
        for (x, r) in self.table.rows().enumerate() {
            let mut rec = vec![x.to_string()];
            rec.extend(r.iter().map(|v| dec::encode(*v)));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

impl Assignment for Predictor {
    fn table(&self) -> &VectorTable {
        &self.table
    }
}

/// A subpopulation with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: String,
    members: Vec<usize>,
}

impl Group {
    /// Members are sorted and deduplicated.
    pub fn new(id: impl Into<String>, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { id: id.into(), members }
    }

    pub fn full(n: usize) -> Self {
        Self::new("X", (0..n).collect())
    }

    pub fn from_mask(id: impl Into<String>, mask: &[bool]) -> Self {
        Self::new(id, mask.iter().enumerate().filter(|(_, &b)| b).map(|(x, _)| x).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn complement(&self, n: usize, id: impl Into<String>) -> Self {
        let mut mask = vec![true; n];
        for &x in &self.members {
            mask[x] = false;
        }
        Self::from_mask(id, &mask)
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &x in &self.members {
            m[x] = true;
        }
        m
    }
}

/// The collection `C` of audited groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCollection {
    groups: Vec<Group>,
}

impl GroupCollection {
    pub fn new(n: usize, groups: Vec<Group>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for g in &groups {
            if !seen.insert(g.id.clone()) {
                return Err(Error::InvalidGroups(format!("duplicate id {}", g.id)));
            }
            if let Some(&x) = g.members.last() {
                if x >= n {
                    return Err(Error::InvalidGroups(format!("group {} has member {x} >= {n}", g.id)));
                }
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.id == id)
    }

    /// Validates against a population size (used after deserialization).
    pub fn check(&self, n: usize) -> Result<()> {
        Self::new(n, self.groups.clone()).map(|_| ())
    }

    pub fn push(&mut self, g: Group) -> Result<()> {
        if self.get(&g.id).is_some() {
            return Err(Error::InvalidGroups(format!("duplicate id {}", g.id)));
        }
        self.groups.push(g);
        Ok(())
    }
}

/// The `lambda`-grid `{lambda/2, 3 lambda/2, ..., 1 - lambda/2}` with half-open intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Discretization {
    lambda: f64,
    bins: usize,
}

impl TryFrom<f64> for Discretization {
    type Error = Error;
    fn try_from(l: f64) -> Result<Self> {
        Self::new(l)
    }
}

impl From<Discretization> for f64 {
    fn from(d: Discretization) -> f64 {
        d.lambda
    }
}

impl Discretization {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidLambda(lambda));
        }
        let inv = 1.0 / lambda;
        let bins = inv.round();
        if (inv - bins).abs() > 1e-9 {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(Self { lambda, bins: bins as usize })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|i| self.center(i)).collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.bins as f64
    }

    /// Index of the interval containing `v`; the last interval is closed at 1.
    pub fn index(&self, v: f64) -> usize {
        let i = (v * self.bins as f64).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.bins - 1)
        }
    }

    /// Interval `[lo, hi)` of bin `i` (closed at 1 for the last bin).
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (i as f64 / self.bins as f64, (i + 1) as f64 / self.bins as f64)
    }

    pub fn discretize(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.center(self.index(v))).collect()
    }

    pub fn cell(&self, y: &[f64]) -> Vec<usize> {
        y.iter().map(|&v| self.index(v)).collect()
    }
}

/// `discretize(y, d)`: coordinatewise grid centers.
pub fn discretize(y: &StochasticVector, d: &Discretization) -> Vec<f64> {
    d.discretize(y.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discretize_examples() {
        let d = Discretization::new(0.5).unwrap();
        assert_eq!(d.discretize(&[0.5, 0.5]), vec![0.75, 0.75]);
        assert_eq!(d.discretize(&[1.0, 0.0]), vec![0.75, 0.25]);
        assert_eq!(d.discretize(&[0.25, 0.75]), vec![0.25, 0.75]);
        assert!(Discretization::new(0.3).is_err());
        assert!(Discretization::new(1.0).is_err());
    }

    #[test]
    fn intervals_partition_unit_interval() {
        for lambda in [0.5, 0.25, 0.1] {
            let d = Discretization::new(lambda).unwrap();
            for j in 0..=10_000 {
                let v = j as f64 * 1e-4;
                let hits = (0..d.bins())
                    .filter(|&i| {
                        let (lo, hi) = d.interval(i);
                        lo <= v && (v < hi || (i == d.bins() - 1 && v <= hi))
                    })
                    .count();
                assert_eq!(hits, 1, "lambda {lambda} value {v}");
                // Index agrees with the interval test away from float boundary noise.
                let (lo, hi) = d.interval(d.index(v));
                assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
            }
            for i in 0..d.bins() {
                assert_eq!(d.index(d.center(i)), i);
            }
        }
    }

    #[test]
    fn population_checks_and_encoding() {
        assert!(Population::uniform(0).is_err());
        assert!(Population::weighted(vec![0.5, 0.6]).is_err());
        let p = Population::uniform(5).unwrap();
        assert_eq!(p.bit_width(), 3);
        assert_eq!(p.encode(5 - 1), "100");
        assert!(p.is_uniform());
    }

    #[test]
    fn nature_flags_and_roundtrip() {
        let ts = TypeSpace::new(2).unwrap();
        let n = Nature::from_labels(ts.clone(), &[0, 0, 1, 1]).unwrap();
        assert!(n.is_deterministic());
        assert_eq!(n.labels().unwrap(), vec![0, 0, 1, 1]);
        let s = serde_json::to_string(&n).unwrap();
        assert!(s.contains("\"1\""));
        let back: Nature = serde_json::from_str(&s).unwrap();
        assert_eq!(back, n);
        let h = Nature::new(ts, &vec![vec![0.5, 0.5]; 4]).unwrap();
        assert!(!h.is_deterministic());
    }

    #[test]
    fn predictor_roundtrip_exact() {
        let p = Predictor::new(3, &[vec![0.1, 0.2, 0.7], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]).unwrap();
        let back: Predictor = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn group_collection_validation() {
        assert!(GroupCollection::new(4, vec![Group::new("a", vec![4])]).is_err());
        assert!(GroupCollection::new(4, vec![Group::new("a", vec![1]), Group::new("a", vec![2])]).is_err());
        let g = Group::new("a", vec![3, 1, 1]);
        assert_eq!(g.members(), &[1, 3]);
        assert_eq!(g.complement(4, "b").members(), &[0, 2]);
    }

    #[test]
    fn numeric_types_validated() {
        assert!(TypeSpace::numeric(vec![0.5, 0.25]).is_err());
        assert!(TypeSpace::new(1).is_err());
        assert_eq!(TypeSpace::numeric_grid(4).unwrap().values.unwrap()[0], 0.125);
    }
}
