//! Restricted least-squares fits for submodels of a finite design.
//!
//! A submodel is a [`ModelMask`]: the set of columns whose coefficients are left
//! free. Every other coefficient is held at zero and `Y` is regressed on the
//! remaining columns. Fits go through a Householder QR; a numerically collinear
//! selection is an error rather than a pseudo-inverse.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, ColMatrix, HouseholderQr};

/// A candidate submodel: an ascending set of distinct column indices below `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelMask {
    included: Vec<usize>,
    p: usize,
}

impl ModelMask {
    /// Build a mask from arbitrary indices; they are sorted, and duplicates or
    /// indices `>= p` are rejected.
    pub fn new(p: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut included: Vec<usize> = indices.into_iter().collect();
        included.sort_unstable();
        if let Some(w) = included.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidMask(format!("duplicate index {}", w[0])));
        }
        if let Some(&last) = included.last() {
            if last >= p {
                return Err(Error::InvalidMask(format!("index {last} >= p = {p}")));
            }
        }
        Ok(Self { included, p })
    }

    pub fn empty(p: usize) -> Self {
        Self {
            included: Vec::new(),
            p,
        }
    }

    /// The leading-term model `{0, .., k-1}`.
    pub fn leading(p: usize, k: usize) -> Self {
        assert!(k <= p, "leading mask order {k} exceeds p = {p}");
        Self {
            included: (0..k).collect(),
            p,
        }
    }

    pub fn full(p: usize) -> Self {
        Self::leading(p, p)
    }

    /// Number of included regressors, `|m|`.
    #[inline]
    pub fn order(&self) -> usize {
        self.included.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn indices(&self) -> &[usize] {
        &self.included
    }

    pub fn contains(&self, j: usize) -> bool {
        self.included.binary_search(&j).is_ok()
    }

    pub fn is_subset_of(&self, other: &ModelMask) -> bool {
        self.included.iter().all(|&j| other.contains(j))
    }

    /// This mask with the given indices removed.
    pub fn without(&self, drop: &[usize]) -> ModelMask {
        ModelMask {
            included: self
                .included
                .iter()
                .copied()
                .filter(|j| !drop.contains(j))
                .collect(),
            p: self.p,
        }
    }

    /// Indicator sequence of length `p`.
    pub fn to_indicator(&self) -> Vec<bool> {
        let mut ind = vec![false; self.p];
        for &j in &self.included {
            ind[j] = true;
        }
        ind
    }
}

impl fmt::Display for ModelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        // Collapse runs so long leading-term masks stay readable.
        let mut first = true;
        let mut i = 0;
        while i < self.included.len() {
            let start = self.included[i];
            let mut end = start;
            while i + 1 < self.included.len() && self.included[i + 1] == end + 1 {
                i += 1;
                end += 1;
            }
            if !first {
                write!(f, ",")?;
            }
            first = false;
            if end > start {
                write!(f, "{start}..={end}")?;
            } else {
                write!(f, "{start}")?;
            }
            i += 1;
        }
        write!(f, "}}/{}", self.p)
    }
}

/// A sample `(Y, X)`: `n` observations of `p` regressors and a response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: ColMatrix,
    y: Vec<f64>,
}

impl Dataset {
    /// Validates `n >= 3`, matching lengths and finiteness of every entry.
    pub fn new(x: ColMatrix, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidData(format!(
                "X has {} rows but Y has length {}",
                x.nrows(),
                y.len()
            )));
        }
        if y.len() < 3 {
            return Err(Error::InvalidData(format!(
                "need at least 3 observations, got {}",
                y.len()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) || !x.as_col_major().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        Ok(Self { x, y })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &ColMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Read a dataset from CSV with header `y,x0,..,x{p-1}`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("y") {
            return Err(Error::InvalidData("first column must be named `y`".into()));
        }
        let p = headers.len() - 1;
        for (j, h) in headers.iter().skip(1).enumerate() {
            if h != format!("x{j}") {
                return Err(Error::InvalidData(format!(
                    "column {} must be named `x{j}`, found `{h}`",
                    j + 1
                )));
            }
        }
        let mut y = Vec::new();
        let mut columns = vec![Vec::new(); p];
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != p + 1 {
                return Err(Error::InvalidData(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    record.len(),
                    p + 1
                )));
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidData(format!("row {}: cannot parse `{s}`", line + 1))
                })
            };
            y.push(parse(&record[0])?);
            for (j, col) in columns.iter_mut().enumerate() {
                col.push(parse(&record[j + 1])?);
            }
        }
        let n = y.len();
        Dataset::new(ColMatrix::from_columns(n, &columns), y)
    }

    /// Write the dataset in the same CSV layout `from_csv_reader` accepts.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend((0..self.p()).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.p() + 1);
        for i in 0..self.n() {
            row.clear();
            row.push(self.y[i].to_string());
            row.extend((0..self.p()).map(|j| self.x.get(i, j).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Restricted least-squares estimate and its residual sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Length `p`, zero outside the mask.
    pub beta_hat: Vec<f64>,
    pub rss: f64,
}

pub(crate) fn check_order(order: usize, n: usize) -> Result<()> {
    if order + 1 >= n {
        return Err(Error::OrderTooLarge {
            order,
            n,
            limit: n - 1,
        });
    }
    Ok(())
}

fn check_mask(data: &Dataset, mask: &ModelMask) -> Result<()> {
    if mask.p() != data.p() {
        return Err(Error::InvalidMask(format!(
            "mask is over {} regressors but the dataset has {}",
            mask.p(),
            data.p()
        )));
    }
    check_order(mask.order(), data.n())
}

/// Least squares of `y` on the columns of `x`, which must have full column rank.
/// Returns the coefficients and the residual sum of squares.
pub(crate) fn least_squares(x: ColMatrix, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let k = x.ncols();
    if k == 0 {
        return Ok((Vec::new(), norm_sq(y)));
    }
    let qr = HouseholderQr::factor(x);
    let rank = qr.leading_rank(k);
    if rank < k {
        return Err(Error::RankDeficient { rank, order: k });
    }
    let mut qty = y.to_vec();
    qr.apply_qt(&mut qty);
    let coef = qr.solve_leading(k, &qty);
    Ok((coef, norm_sq(&qty[k..])))
}

/// Regress `Y` on the columns selected by `mask`, holding the rest at zero.
pub fn fit_restricted_ls(data: &Dataset, mask: &ModelMask) -> Result<FitResult> {
    check_mask(data, mask)?;
    let (coef, rss) = least_squares(data.x.select_columns(mask.indices()), &data.y)?;
    let mut beta_hat = vec![0.0; data.p()];
    for (&j, c) in mask.indices().iter().zip(coef) {
        beta_hat[j] = c;
    }
    Ok(FitResult { beta_hat, rss })
}

/// Fits of every leading-term model `{0..k-1}`, `k = 0..=p_max`, from a single
/// QR of the first `p_max` columns. Entry `k` equals
/// `fit_restricted_ls(data, &ModelMask::leading(p, k))` up to rounding.
pub fn fit_leading_terms(data: &Dataset, p_max: usize) -> Result<Vec<FitResult>> {
    if p_max > data.p() {
        return Err(Error::InvalidMask(format!(
            "p_max = {p_max} exceeds p = {}",
            data.p()
        )));
    }
    check_order(p_max, data.n())?;
    let p = data.p();
    let cols: Vec<usize> = (0..p_max).collect();
    let qr = HouseholderQr::factor(data.x.select_columns(&cols));
    let mut qty = data.y.clone();
    qr.apply_qt(&mut qty);

    // rss_k = ‖Y‖² minus the first k squared rotated components, accumulated
    // from the tail so each term is a sum of nonnegative pieces.
    let mut tail = vec![0.0; p_max + 1];
    tail[p_max] = norm_sq(&qty[p_max..]);
    for k in (0..p_max).rev() {
        tail[k] = tail[k + 1] + qty[k] * qty[k];
    }

    let mut out = Vec::with_capacity(p_max + 1);
    for k in 0..=p_max {
        let rank = qr.leading_rank(k);
        if rank < k {
            return Err(Error::RankDeficient { rank, order: k }.at_mask(&ModelMask::leading(p, k)));
        }
        let coef = qr.solve_leading(k, &qty);
        let mut beta_hat = vec![0.0; p];
        beta_hat[..k].copy_from_slice(&coef);
        out.push(FitResult {
            beta_hat,
            rss: tail[k],
        });
    }
    Ok(out)
}
