//! Text checkpoint format.
//!
//! ```text
//! HTPSCKPT v1
//! kind <model kind>
//! meta <key> <value>        (zero or more, sorted by key)
//! tensors <count>
//! tensor <name> <rows> <cols>
//! <rows lines of cols space-separated values>
//! ...
//! end
//! ```
//!
//! Values use the shortest decimal that parses back to the same float, so a
//! save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{parse_scalar, Scalar};

pub const CHECKPOINT_MAGIC: &str = "HTPSCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model_kind: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<Tensor<T>>,
}

fn check_token(what: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("{what} {s:?} must be a non-empty token without whitespace")));
    }
    Ok(())
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(model_kind: impl Into<String>) -> Self {
        Checkpoint {
            model_kind: model_kind.into(),
            meta: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_owned(), value.to_string());
    }

    pub fn meta_value<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self
            .meta
            .get(key)
            .ok_or_else(|| Error::Corrupt(format!("checkpoint lacks meta key {key:?}")))?;
        raw.parse()
            .map_err(|_| Error::Corrupt(format!("checkpoint meta {key:?} has bad value {raw:?}")))
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, rows: usize, cols: usize, data: &[T]) {
        debug_assert_eq!(rows * cols, data.len());
        self.tensors.push(Tensor {
            name: name.into(),
            rows,
            cols,
            data: data.to_vec(),
        });
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Corrupt(format!("checkpoint lacks tensor {name:?}")))
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        check_token("model kind", &self.model_kind)?;
        for (k, v) in &self.meta {
            check_token("meta key", k)?;
            check_token("meta value", v)?;
        }
        for t in &self.tensors {
            check_token("tensor name", &t.name)?;
        }
        let mut w = std::io::BufWriter::new(out);
        let io = |e: std::io::Error| Error::Corrupt(format!("write failed: {e}"));
        writeln!(w, "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}").map_err(io)?;
        writeln!(w, "kind {}", self.model_kind).map_err(io)?;
        for (k, v) in &self.meta {
            writeln!(w, "meta {k} {v}").map_err(io)?;
        }
        writeln!(w, "tensors {}", self.tensors.len()).map_err(io)?;
        for t in &self.tensors {
            writeln!(w, "tensor {} {} {}", t.name, t.rows, t.cols).map_err(io)?;
            for row in t.data.chunks(t.cols.max(1)) {
                let line: Vec<String> = row.iter().map(T::to_string).collect();
                writeln!(w, "{}", line.join(" ")).map_err(io)?;
            }
        }
        writeln!(w, "end").map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::Corrupt(format!("line {}: {e}", i + 1))),
                None => Err(Error::Corrupt("unexpected end of checkpoint".into())),
            }
        };
        let corrupt = |line: usize, msg: &str| Error::Corrupt(format!("line {line}: {msg}"));

        let (_, head) = next()?;
        let mut parts = head.split_whitespace();
        if parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(Error::Corrupt(format!("not a checkpoint (header {head:?})")));
        }
        let version = parts.next().unwrap_or("");
        if version != format!("v{CHECKPOINT_VERSION}") {
            return Err(Error::Version {
                expected: CHECKPOINT_VERSION,
                found: version.to_owned(),
            });
        }

        let (ln, kind_line) = next()?;
        let model_kind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| corrupt(ln, "expected `kind`"))?
            .trim()
            .to_owned();

        let mut meta = BTreeMap::new();
        let count = loop {
            let (ln, line) = next()?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["meta", k, v] => {
                    meta.insert((*k).to_owned(), (*v).to_owned());
                }
                ["tensors", n] => break n.parse::<usize>().map_err(|_| corrupt(ln, "bad tensor count"))?,
                _ => return Err(corrupt(ln, "expected `meta` or `tensors`")),
            }
        };

        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, line) = next()?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (name, rows, cols) = match fields.as_slice() {
                ["tensor", name, r, c] => (
                    (*name).to_owned(),
                    r.parse::<usize>().map_err(|_| corrupt(ln, "bad row count"))?,
                    c.parse::<usize>().map_err(|_| corrupt(ln, "bad column count"))?,
                ),
                _ => return Err(corrupt(ln, "expected `tensor <name> <rows> <cols>`")),
            };
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, line) = next()?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    data.push(parse_scalar::<T>(tok).map_err(|m| corrupt(ln, &m))?);
                }
                if data.len() - before != cols {
                    return Err(corrupt(ln, &format!("expected {cols} values in tensor {name}")));
                }
            }
            tensors.push(Tensor { name, rows, cols, data });
        }
        let (ln, last) = next()?;
        if last.trim() != "end" {
            return Err(corrupt(ln, "expected `end`"));
        }
        Ok(Checkpoint {
            model_kind,
            meta,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint<f64> {
        let mut c = Checkpoint::new("mlp");
        c.set_meta("epoch", 3);
        c.set_meta("valid_mse", 0.1f64 + 0.2);
        c.push_tensor("l0.w", 2, 3, &[0.1, -1.0 / 3.0, 1e-300, 5.0, -0.0, 7.25]);
        c.push_tensor("l0.b", 1, 2, &[0.0, f64::MIN_POSITIVE]);
        c
    }

    #[test]
    fn round_trip_bit_exact() {
        let c = sample();
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        let back = Checkpoint::<f64>::read(&buf[..]).unwrap();
        assert_eq!(back.model_kind, "mlp");
        assert_eq!(back.meta, c.meta);
        for (a, b) in back.tensors.iter().zip(&c.tensors) {
            let bits = |t: &Tensor<f64>| t.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
            assert_eq!((a.rows, a.cols, &a.name), (b.rows, b.cols, &b.name));
        }
        assert_eq!(back.meta_value::<usize>("epoch").unwrap(), 3);
    }

    #[test]
    fn wrong_version_and_truncation() {
        let mut buf = Vec::new();
        sample().write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let v2 = text.replacen("HTPSCKPT v1", "HTPSCKPT v2", 1);
        assert!(matches!(Checkpoint::<f64>::read(v2.as_bytes()), Err(Error::Version { .. })));

        for cut in [text.len() / 2, text.len() - 5, 12] {
            let err = Checkpoint::<f64>::read(text[..cut].as_bytes()).unwrap_err();
            assert!(matches!(err, Error::Corrupt(_)), "cut {cut}: {err:?}");
        }
    }

    #[test]
    fn rejects_whitespace_in_meta() {
        let mut c = sample();
        c.set_meta("note", "two words");
        assert!(c.write(Vec::new()).is_err());
    }
}
