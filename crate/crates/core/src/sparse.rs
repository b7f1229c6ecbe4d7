//! Compressed-row real square matrices and the coordinate text format.
//!
//! The text format is a header line `%%sparse-coordinate real`, a size line
//! `rows cols nnz`, then one `row col value` line per stored entry with
//! 1-based indices. Further lines starting with `%` are comments.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::format::sci;

pub const COORDINATE_HEADER: &str = "%%sparse-coordinate real";

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; repeated positions are summed.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = t.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::validation(format!(
                "entry ({r}, {c}) outside {dim}x{dim}"
            )));
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut rows = vec![Vec::new(); dim];
        for (r, c, v) in t {
            match rows[r].last_mut() {
                Some((lc, lv)) if *lc == c => *lv += v,
                _ => rows[r].push((c, v)),
            }
        }
        Ok(Self::from_rows(rows))
    }

    /// Builds from per-row entry lists, each sorted by column without repeats.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .filter(|&c| m[(r, c)] != 0.0)
                    .map(|c| (c, m[(r, c)]))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.dim) {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            *out = self.cols[span.clone()]
                .iter()
                .zip(&self.vals[span])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        y
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for (_, c, v) in self.iter() {
            sums[c] += v;
        }
        sums
    }

    /// `max |A_rc - A_cr|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest off-diagonal entry, with its position.
    pub fn max_off_diagonal(&self) -> Option<(usize, usize, f64)> {
        self.iter()
            .filter(|&(r, c, _)| r != c)
            .fold(None, |best, e| match best {
                Some((_, _, v)) if v >= e.2 => best,
                _ => Some(e),
            })
    }

    /// Entrywise transform, keeping the sparsity pattern.
    pub fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.vals[k] = f(r, self.cols[k], self.vals[k]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// `max_rc |A_rc - B_rc|` over the union of both patterns.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let a = self.iter().map(|(r, c, v)| (v - other.get(r, c)).abs());
        let b = other.iter().map(|(r, c, v)| (v - self.get(r, c)).abs());
        a.chain(b).fold(0.0, f64::max)
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum of a symmetric matrix.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut d = 0.0;
            let mut radius = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    d = v;
                } else {
                    radius += v.abs();
                }
            }
            lo = lo.min(d - radius);
            hi = hi.max(d + radius);
        }
        (lo, hi)
    }

    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{COORDINATE_HEADER}")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{} {} {}", r + 1, c + 1, sci(v))?;
        }
        Ok(())
    }

    pub fn read_coordinate(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some(h) if h == COORDINATE_HEADER => {}
            other => {
                return Err(Error::validation(format!(
                    "expected header {COORDINATE_HEADER:?}, found {other:?}"
                )))
            }
        }
        let mut lines = lines.filter(|l| !l.starts_with('%'));
        let size = lines
            .next()
            .ok_or_else(|| Error::validation("missing size line"))?;
        let size: Vec<usize> = parse_fields(size)?;
        let [rows, cols, nnz] = size[..] else {
            return Err(Error::validation("size line needs `rows cols nnz`"));
        };
        if rows != cols {
            return Err(Error::validation(format!(
                "matrix is {rows}x{cols}, not square"
            )));
        }
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [r, c, v] = fields[..] else {
                return Err(Error::validation(format!("bad entry line {line:?}")));
            };
            let parse_idx = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(i - 1),
                    _ => Err(Error::validation(format!("bad index {s:?}"))),
                }
            };
            let v: f64 = v
                .parse()
                .map_err(|_| Error::validation(format!("bad value {v:?}")))?;
            triplets.push((parse_idx(r)?, parse_idx(c)?, v));
        }
        if triplets.len() != nnz {
            return Err(Error::validation(format!(
                "size line announces {nnz} entries, found {}",
                triplets.len()
            )));
        }
        Self::from_triplets(rows, triplets)
    }
}

fn parse_fields(line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|f| {
            f.parse()
                .map_err(|_| Error::validation(format!("bad size field {f:?}")))
        })
        .collect()
}
