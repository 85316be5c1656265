//! JSON value helpers and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::scalar::{parse_q, Q};

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Str(String),
    Int(i64),
}

/// A rational read from `"p/q"`, a decimal string, or a JSON integer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNumber", into = "String")]
pub struct Rat(pub Q);

impl TryFrom<RawNumber> for Rat {
    type Error = Error;
    fn try_from(r: RawNumber) -> Result<Self> {
        match r {
            RawNumber::Str(s) => parse_q(&s).map(Rat),
            RawNumber::Int(i) => Ok(Rat(Q::from_integer(i.into()))),
        }
    }
}

impl From<Rat> for String {
    fn from(r: Rat) -> String {
        r.0.to_string()
    }
}

/// Like [`Rat`] but also accepts `"inf"` and `"-inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNumber", into = "String")]
pub struct ExtRat(pub Ext<Q>);

impl TryFrom<RawNumber> for ExtRat {
    type Error = Error;
    fn try_from(r: RawNumber) -> Result<Self> {
        match r {
            RawNumber::Str(s) => Ext::parse(&s).map(ExtRat),
            RawNumber::Int(i) => Ok(ExtRat(Ext::Fin(Q::from_integer(i.into())))),
        }
    }
}

impl From<ExtRat> for String {
    fn from(r: ExtRat) -> String {
        r.0.to_string()
    }
}

pub fn rats(v: &[Rat]) -> Vec<Q> {
    v.iter().map(|r| r.0.clone()).collect()
}

pub fn to_rats(v: &[Q]) -> Vec<Rat> {
    v.iter().cloned().map(Rat).collect()
}

/// Parses JSON, reporting line and column on failure.
pub fn from_json_str<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    from_json_str(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Invalid(format!("{}: {e}", path.display()));
    let name = path.file_name().ok_or_else(|| Error::Invalid(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}
