//! Exact rationals in JSON: written as `"p/q"` strings (integers bare),
//! read from strings in term syntax (`"-3/2"`, `"1.5"`) or JSON integers.

use inst_core::kernel::{format_number, Number, Term};
use inst_core::parser::parse_term;
use serde::{Deserialize, Deserializer, Serializer};

pub fn parse(text: &str) -> Result<Number, String> {
    match parse_term(text) {
        Ok(Term::Num(n)) => Ok(n),
        Ok(other) => Err(format!("`{other}` is not a number")),
        Err(e) => Err(format!("`{text}` is not a number: {e}")),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Int(i64),
    Str(String),
}

impl Raw {
    fn number<E: serde::de::Error>(self) -> Result<Number, E> {
        match self {
            Raw::Int(i) => Ok(Number::from_integer(i.into())),
            Raw::Str(s) => parse(&s).map_err(E::custom),
        }
    }
}

pub mod one {
    use super::*;

    pub fn serialize<S: Serializer>(n: &Number, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_number(n))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Number, D::Error> {
        Raw::deserialize(d)?.number()
    }
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(ns: &[Number], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(ns.len()))?;
        for n in ns {
            seq.serialize_element(&format_number(n))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Number>, D::Error> {
        Vec::<Raw>::deserialize(d)?.into_iter().map(Raw::number).collect()
    }
}
