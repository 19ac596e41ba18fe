//! Serde helpers writing probabilities as decimal strings.
//!
//! Rust's `Display` for `f64` emits the shortest string that parses back to
//! the same value, so documents round-trip bit for bit.

use serde::{Deserialize, Deserializer, Serializer};

pub fn encode(x: f64) -> String {
    format!("{x}")
}

pub fn decode<E: serde::de::Error>(s: &str) -> Result<f64, E> {
    s.trim().parse::<f64>().map_err(|e| E::custom(format!("bad decimal {s:?}: {e}")))
}

pub fn ser_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| encode(*x)))
}

pub fn de_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let raw = Vec::<String>::deserialize(d)?;
    raw.iter().map(|s| decode(s)).collect()
}

pub fn ser_rows<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.iter().map(|x| encode(*x)).collect::<Vec<_>>()))
}

pub fn de_rows<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    let raw = Vec::<Vec<String>>::deserialize(d)?;
    raw.iter().map(|r| r.iter().map(|s| decode(s)).collect()).collect()
}

pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&encode(*v))
}

pub fn de_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let raw = String::deserialize(d)?;
    decode::<D::Error>(&raw)
}
