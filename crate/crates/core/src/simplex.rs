//! Stochastic vectors and simplex arithmetic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Tolerance on the sum of a stochastic vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A probability distribution over `k` types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StochasticVector(Vec<f64>);

pub(crate) fn check_entries(v: &[f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::InvalidVector(format!("length {} < 2", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some(x) = v.iter().find(|&&x| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&x)) {
        return Err(Error::InvalidVector(format!("entry {x} outside [0,1]")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidVector(format!("entries sum to {s}")));
    }
    Ok(())
}

impl StochasticVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_entries(&entries)?;
        Ok(Self(entries))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the coordinate equal to 1, if the vector is a point mass.
    pub fn point_mass(&self) -> Option<usize> {
        self.0.iter().position(|&x| x == 1.0)
    }

    /// Convex combination `gamma * self + (1 - gamma) * other`.
    pub fn mix(&self, other: &Self, gamma: f64) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| gamma * a + (1.0 - gamma) * b).collect())
    }
}

impl TryFrom<Vec<f64>> for StochasticVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StochasticVector> for Vec<f64> {
    fn from(v: StochasticVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for StochasticVector {
    type Output = f64;
    fn index(&self, t: usize) -> &f64 {
        &self.0[t]
    }
}

/// The point mass `e_t` in dimension `k`.
pub fn unit_vector(t: usize, k: usize) -> Result<StochasticVector> {
    if t >= k {
        return Err(Error::IndexOutOfRange { index: t, size: k });
    }
    let mut v = vec![0.0; k];
    v[t] = 1.0;
    Ok(StochasticVector(v))
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn simplex_project(v: &[f64]) -> Result<StochasticVector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if v.len() < 2 {
        return Err(Error::InvalidVector(format!("length {} < 2", v.len())));
    }
    let mut out = v.to_vec();
    project_in_place(&mut out);
    Ok(StochasticVector(out))
}

/// In-place projection used by learners on raw rows.
pub(crate) fn project_in_place(v: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // Remove residual rounding so the row sums to 1 to machine precision.
    let s: f64 = v.iter().sum();
    if s > 0.0 && (s - 1.0).abs() > 1e-15 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// Draw a type index from `y` using one uniform from `rng`.
pub fn sample_type<R: Rng + ?Sized>(y: &[f64], rng: &mut R) -> usize {
    sample_with_uniform(y, rng.gen::<f64>())
}

/// Draw a type for stream-indexed sampling without a mutable generator.
pub fn sample_type_at(y: &[f64], stream: &RandomStream, index: u64) -> usize {
    sample_with_uniform(y, stream.uniform_at(index))
}

pub(crate) fn sample_with_uniform(y: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (t, &p) in y.iter().enumerate() {
        if p > 0.0 {
            last = t;
            acc += p;
            if u < acc {
                return t;
            }
        }
    }
    last
}
