//! Canonical report emission: sorted keys, floats rounded to 12 significant
//! digits, stable CSV column order.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{GroupCollection, Nature, Population, Predictor};
use crate::error::{Error, Result};
use crate::loss::LossFunction;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap()
}

/// Shortest decimal of the rounded value (used in CSV and plot files).
pub fn fmt_float(x: f64) -> String {
    format!("{}", round_sig(x))
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().unwrap());
            serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        // serde_json's default map is ordered by key, so objects come out sorted.
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

pub fn canonical_value<T: Serialize + ?Sized>(t: &T) -> Result<Value> {
    Ok(canonicalize(serde_json::to_value(t)?))
}

/// Canonical pretty JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(t: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&canonical_value(t)?)?;
    s.push('\n');
    Ok(s)
}

/// Two-column plot data with an `x y` header.
pub fn plot_data(points: &[(f64, f64)]) -> String {
    let mut s = String::from("x\ty\n");
    for (x, y) in points {
        s.push_str(&format!("{}\t{}\n", fmt_float(*x), fmt_float(*y)));
    }
    s
}

pub const INSTANCE_SCHEMA: &str = "calibra.instance";
pub const INSTANCE_VERSION: u32 = 1;

/// Serialized problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub schema: String,
    pub version: u32,
    pub population: Population,
    pub nature: Nature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<Predictor>,
    pub groups: GroupCollection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub losses: Vec<LossFunction>,
}

impl Instance {
    pub fn new(population: Population, nature: Nature, groups: GroupCollection) -> Self {
        Self { schema: INSTANCE_SCHEMA.into(), version: INSTANCE_VERSION, population, nature, predictor: None, groups, losses: Vec::new() }
    }

    /// Cross-field checks after parsing.
    pub fn validate(&self) -> Result<()> {
        if self.schema != INSTANCE_SCHEMA || self.version != INSTANCE_VERSION {
            return Err(Error::Serde(format!("unsupported schema {} v{}", self.schema, self.version)));
        }
        let n = self.population.size();
        use crate::domain::Assignment;
        if self.nature.len() != n {
            return Err(Error::Dimension { expected: n, got: self.nature.len() });
        }
        if let Some(p) = &self.predictor {
            if p.len() != n || p.k() != self.nature.k() {
                return Err(Error::Dimension { expected: n, got: p.len() });
            }
        }
        self.groups.check(n)?;
        if self.losses.iter().any(|l| l.k() != self.nature.k()) {
            return Err(Error::Dimension { expected: self.nature.k(), got: 0 });
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }
}
