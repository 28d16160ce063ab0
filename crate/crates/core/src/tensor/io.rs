//! Plain-text file formats for tensors and CPD models.
//!
//! Tensor file:
//!
//! ```text
//! LRMC-TENSOR 1
//! order <k>
//! shape <n_1> ... <n_k>
//! data
//! <n_k entries>          # one line per fiber along the last axis,
//! ...                    # fibers in row-major order
//! end
//! ```
//!
//! CPD model file (matrix blocks are written row by row):
//!
//! ```text
//! LRMC-CPD 1
//! rank <F>
//! dims <I_1> ... <I_D>
//! matrix lambda 1 <F>
//! <F entries>
//! matrix Q1 <I_1> <F>
//! <I_1 lines of F entries>
//! ...                    # Q1..QD, then Qp1..QpD for the out-factors
//! end
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Entries use the
//! shortest decimal form that round-trips exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{CpdModel, DenseTensor, StateSpace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const TENSOR_MAGIC: &str = "LRMC-TENSOR";
pub const MODEL_MAGIC: &str = "LRMC-CPD";
pub const FORMAT_VERSION: u32 = 1;

/// Line source that skips comments and tracks line numbers for diagnostics.
pub(crate) struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    pub(crate) fn new(reader: R) -> Self {
        Self { inner: reader.lines(), line: 0 }
    }

    pub(crate) fn line(&self) -> usize {
        self.line
    }

    pub(crate) fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Format { line: self.line, message: message.into() })
    }

    pub(crate) fn next_content(&mut self) -> Result<String> {
        loop {
            let Some(raw) = self.inner.next() else {
                return self.err("unexpected end of file");
            };
            self.line += 1;
            let raw = raw?;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(trimmed.to_string());
        }
    }

    /// Reads `keyword v1 v2 ...` and returns the values.
    pub(crate) fn keyword(&mut self, keyword: &str) -> Result<Vec<String>> {
        let line = self.next_content()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(keyword) {
            return self.err(format!("expected `{keyword}`, found `{line}`"));
        }
        Ok(parts.map(str::to_string).collect())
    }

    pub(crate) fn parse<V: std::str::FromStr>(&self, token: &str) -> Result<V> {
        token
            .parse()
            .map_err(|_| Error::Format { line: self.line, message: format!("cannot parse `{token}`") })
    }

    pub(crate) fn header(&mut self, magic: &str) -> Result<()> {
        let values = self.keyword(magic)?;
        let version: u32 = match values.as_slice() {
            [v] => self.parse(v)?,
            _ => return self.err(format!("expected `{magic} <version>`")),
        };
        if version != FORMAT_VERSION {
            return self.err(format!("unsupported {magic} version {version}"));
        }
        Ok(())
    }

    pub(crate) fn usizes(&mut self, keyword: &str) -> Result<Vec<usize>> {
        let values = self.keyword(keyword)?;
        values.iter().map(|v| self.parse(v)).collect()
    }

    pub(crate) fn single(&mut self, keyword: &str) -> Result<usize> {
        match self.usizes(keyword)?.as_slice() {
            [v] => Ok(*v),
            _ => self.err(format!("expected a single value after `{keyword}`")),
        }
    }

    fn scalars<T: Scalar>(&mut self, expected: usize) -> Result<Vec<T>> {
        let line = self.next_content()?;
        let values: Vec<T> = line.split_whitespace().map(|v| self.parse(v)).collect::<Result<_>>()?;
        if values.len() != expected {
            return self.err(format!("expected {expected} entries, found {}", values.len()));
        }
        Ok(values)
    }
}

fn push_row<T: Scalar>(out: &mut String, row: impl Iterator<Item = T>) {
    let mut first = true;
    for x in row {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{x}");
    }
    out.push('\n');
}

pub fn tensor_to_string<T: Scalar>(t: &DenseTensor<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TENSOR_MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "order {}", t.order());
    let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "shape {}", shape.join(" "));
    out.push_str("data\n");
    let width = *t.shape().last().expect("tensor has at least one axis");
    for fiber in t.data().chunks(width) {
        push_row(&mut out, fiber.iter().copied());
    }
    out.push_str("end\n");
    out
}

pub fn read_tensor_from<T: Scalar, R: BufRead>(reader: R) -> Result<DenseTensor<T>> {
    let mut lines = Lines::new(reader);
    lines.header(TENSOR_MAGIC)?;
    let order = lines.single("order")?;
    let shape = lines.usizes("shape")?;
    if shape.len() != order {
        return lines.err(format!("shape has {} axes, order says {order}", shape.len()));
    }
    lines.keyword("data")?;
    let width = *shape.last().unwrap_or(&0);
    let fibers: usize = shape[..shape.len().saturating_sub(1)].iter().product();
    let mut data = Vec::with_capacity(fibers * width);
    for _ in 0..fibers {
        data.extend(lines.scalars::<T>(width)?);
    }
    lines.keyword("end")?;
    DenseTensor::new(shape, data)
}

pub fn write_tensor<T: Scalar>(path: &Path, t: &DenseTensor<T>) -> Result<()> {
    write_file(path, &tensor_to_string(t))
}

pub fn read_tensor<T: Scalar>(path: &Path) -> Result<DenseTensor<T>> {
    read_tensor_from(open(path)?)
}

fn push_matrix<T: Scalar>(out: &mut String, name: &str, m: &Array2<T>) {
    let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
    for row in m.outer_iter() {
        push_row(out, row.iter().copied());
    }
}

pub fn model_to_string<T: Scalar>(model: &CpdModel<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "rank {}", model.rank());
    let dims: Vec<String> = model.space().dims().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "dims {}", dims.join(" "));
    let lambda = model.weights().clone().insert_axis(ndarray::Axis(0));
    push_matrix(&mut out, "lambda", &lambda);
    for (d, q) in model.factors_in().iter().enumerate() {
        push_matrix(&mut out, &format!("Q{}", d + 1), q);
    }
    for (d, q) in model.factors_out().iter().enumerate() {
        push_matrix(&mut out, &format!("Qp{}", d + 1), q);
    }
    out.push_str("end\n");
    out
}

fn read_matrix<T: Scalar, R: BufRead>(lines: &mut Lines<R>, name: &str, rows: usize, cols: usize) -> Result<Array2<T>> {
    let head = lines.keyword("matrix")?;
    match head.as_slice() {
        [n, r, c] if n == name => {
            let (r, c): (usize, usize) = (lines.parse(r)?, lines.parse(c)?);
            if (r, c) != (rows, cols) {
                return lines.err(format!("matrix {name} is {r}x{c}, expected {rows}x{cols}"));
            }
        }
        _ => return lines.err(format!("expected `matrix {name} {rows} {cols}`")),
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        data.extend(lines.scalars::<T>(cols)?);
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("sized above"))
}

pub fn read_model_from<T: Scalar, R: BufRead>(reader: R) -> Result<CpdModel<T>> {
    let mut lines = Lines::new(reader);
    lines.header(MODEL_MAGIC)?;
    let rank = lines.single("rank")?;
    let dims = lines.usizes("dims")?;
    let space = StateSpace::new(dims.clone())?;
    let lambda: Array1<T> = read_matrix(&mut lines, "lambda", 1, rank)?.row(0).to_owned();
    let mut bank = |prefix: &str| -> Result<Vec<Array2<T>>> {
        dims.iter()
            .enumerate()
            .map(|(d, &n)| read_matrix(&mut lines, &format!("{prefix}{}", d + 1), n, rank))
            .collect()
    };
    let q = bank("Q")?;
    let qp = bank("Qp")?;
    lines.keyword("end")?;
    CpdModel::new(space, lambda, q, qp)
}

pub fn write_model<T: Scalar>(path: &Path, model: &CpdModel<T>) -> Result<()> {
    write_file(path, &model_to_string(model))
}

pub fn read_model<T: Scalar>(path: &Path) -> Result<CpdModel<T>> {
    read_model_from(open(path)?)
}

pub(crate) fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(contents.as_bytes())?;
    f.flush()?;
    Ok(())
}
