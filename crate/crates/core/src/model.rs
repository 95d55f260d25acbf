//! The defining triplet `(H, g, m)` of a linear-fractional process, its
//! validation, and the JSON model file format.
//!
//! A type-`i` particle has no offspring with probability `h0[i] = 1 - sum_j
//! H[i][j]`. Otherwise it has one "first" child of type `j` with probability
//! `H[i][j]`, plus a geometric number of extra children with mean `m`, each
//! of type `j` with probability `g[j]`.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LFModel<T> {
    h: SparseMatrix<T>,
    g: Vec<T>,
    m: T,
    h0: Vec<T>,
}

impl<T: Scalar> LFModel<T> {
    /// Validates at the default stochasticity tolerance of `T`.
    pub fn new(h: SparseMatrix<T>, g: Vec<T>, m: T) -> Result<Self> {
        Self::new_with_tol(h, g, m, T::lit(T::STOCHASTIC_TOL))
    }

    pub fn new_with_tol(h: SparseMatrix<T>, g: Vec<T>, m: T, tol: T) -> Result<Self> {
        if g.len() != h.dim() {
            return Err(Error::Parse(format!(
                "g has {} entries but H is {}x{}",
                g.len(),
                h.dim(),
                h.dim()
            )));
        }
        let model = Self::new_unchecked(h, g, m);
        let report = validate_model_with_tol(&model, tol);
        if report.ok {
            Ok(model)
        } else {
            Err(Error::Validation(report))
        }
    }

    /// Builds without checking invariants. Dimensions must still agree.
    pub fn new_unchecked(h: SparseMatrix<T>, g: Vec<T>, m: T) -> Self {
        assert_eq!(g.len(), h.dim(), "g and H dimensions disagree");
        let h0 = h.row_sums().into_iter().map(|s| T::one() - s).collect();
        Self { h, g, m, h0 }
    }

    pub fn from_dense(rows: &[Vec<T>], g: Vec<T>, m: T) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("H must be square".into()));
        }
        Self::new(SparseMatrix::from_dense(rows), g, m)
    }

    #[inline]
    pub fn n_types(&self) -> usize {
        self.g.len()
    }

    pub fn h(&self) -> &SparseMatrix<T> {
        &self.h
    }

    pub fn g(&self) -> &[T] {
        &self.g
    }

    pub fn m(&self) -> T {
        self.m
    }

    /// Probabilities of having no offspring, `1 - H 1^t`.
    pub fn h0(&self) -> &[T] {
        &self.h0
    }

    pub fn cast<U: Scalar>(&self) -> LFModel<U> {
        let conv = |x: T| U::lit(x.to_f64_lossy());
        LFModel {
            h: self.h.map(conv),
            g: self.g.iter().map(|&x| conv(x)).collect(),
            m: conv(self.m),
            h0: self.h0.iter().map(|&x| conv(x)).collect(),
        }
    }

    pub(crate) fn check_type(&self, i: usize) -> Result<()> {
        if i < self.n_types() {
            Ok(())
        } else {
            Err(Error::TypeIndex {
                index: i,
                n_types: self.n_types(),
            })
        }
    }
}

/// One violated invariant. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub row: Option<usize>,
    pub col: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonFinite,
    HNonnegative,
    HRowSubstochastic,
    GNonnegative,
    GSumsToOne,
    MPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| {
                let at = match (v.row, v.col) {
                    (Some(i), Some(j)) => format!("[{i},{j}]"),
                    (Some(i), None) => format!("[{i}]"),
                    _ => String::new(),
                };
                format!("{:?}{at}={}", v.rule, v.value)
            })
            .collect();
        write!(f, "{}", parts.join(", "))
    }
}

pub fn validate_model<T: Scalar>(model: &LFModel<T>) -> ValidationReport {
    validate_model_with_tol(model, T::lit(T::STOCHASTIC_TOL))
}

pub fn validate_model_with_tol<T: Scalar>(model: &LFModel<T>, tol: T) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |rule, row, col, value: T| {
        violations.push(Violation {
            rule,
            row,
            col,
            value: value.to_f64_lossy(),
        })
    };

    for (i, j, v) in model.h.entries() {
        if !v.is_finite() {
            push(Rule::NonFinite, Some(i), Some(j), v);
        } else if v < T::zero() {
            push(Rule::HNonnegative, Some(i), Some(j), v);
        }
    }
    for i in 0..model.n_types() {
        let s = model.h.row_sum(i);
        if s > T::one() + tol {
            push(Rule::HRowSubstochastic, Some(i), None, s);
        }
    }
    for (j, &gj) in model.g.iter().enumerate() {
        if !gj.is_finite() {
            push(Rule::NonFinite, Some(j), None, gj);
        } else if gj < T::zero() {
            push(Rule::GNonnegative, Some(j), None, gj);
        }
    }
    let gsum: T = model.g.iter().copied().sum();
    if (gsum - T::one()).abs() > tol {
        push(Rule::GSumsToOne, None, None, gsum);
    }
    if !(model.m > T::zero()) || !model.m.is_finite() {
        push(Rule::MPositive, None, None, model.m);
    }
    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Mean offspring matrix `M = H + m (H 1^t) g`.
pub fn mean_matrix<T: Scalar>(model: &LFModel<T>) -> DenseMatrix<T> {
    let n = model.n_types();
    let mut out = model.h.to_dense();
    for i in 0..n {
        let extra = model.m * (T::one() - model.h0[i]);
        for j in 0..n {
            out[(i, j)] = out[(i, j)] + extra * model.g[j];
        }
    }
    out
}

/// Mean total offspring per type, `(1 - h0[i]) (1 + m)`.
pub fn total_means<T: Scalar>(model: &LFModel<T>) -> Vec<T> {
    model
        .h0
        .iter()
        .map(|&h0| (T::one() - h0) * (T::one() + model.m))
        .collect()
}

/// Single-type law `h0 + (1-h0) s / (1 + m - m s)` as a one-type model.
pub fn embed_single_type<T: Scalar>(h0: T, m: T) -> Result<LFModel<T>> {
    if !(h0 >= T::zero() && h0 < T::one()) {
        return Err(Error::Domain(format!("h0 = {h0} must lie in [0, 1)")));
    }
    if !(m > T::zero()) {
        return Err(Error::Domain(format!("m = {m} must be positive")));
    }
    LFModel::from_dense(&[vec![T::one() - h0]], vec![T::one()], m)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    n_types: usize,
    m: f64,
    g: Vec<f64>,
    #[serde(rename = "H")]
    h: Value,
    #[serde(rename = "H_format", default, skip_serializing_if = "Option::is_none")]
    h_format: Option<String>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn number(v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| parse_err(format!("expected a number, found {v}")))
}

fn parse_dense(rows: &[Value], n: usize) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == n)
            .ok_or_else(|| parse_err(format!("dense H row {} must have {n} entries", i + 1)))?;
        for (j, v) in row.iter().enumerate() {
            let x = number(v)?;
            if x != 0.0 {
                out.push((i, j, x));
            }
        }
    }
    Ok(out)
}

fn parse_sparse(entries: &[Value], n: usize) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let t = e
            .as_array()
            .filter(|t| t.len() == 3)
            .ok_or_else(|| parse_err(format!("sparse H entry {e} must be [i, j, value]")))?;
        let idx = |v: &Value| {
            v.as_u64()
                .filter(|&k| k >= 1 && k as usize <= n)
                .map(|k| k as usize - 1)
                .ok_or_else(|| parse_err(format!("sparse index {v} not in 1..={n}")))
        };
        out.push((idx(&t[0])?, idx(&t[1])?, number(&t[2])?));
    }
    Ok(out)
}

fn looks_like_triplets(entries: &[Value], n: usize) -> bool {
    entries.iter().all(|e| {
        e.as_array().is_some_and(|t| {
            t.len() == 3
                && t[..2]
                    .iter()
                    .all(|v| v.as_u64().is_some_and(|k| k >= 1 && k as usize <= n))
        })
    })
}

fn looks_dense(rows: &[Value], n: usize) -> bool {
    rows.len() == n && rows.iter().all(|r| r.as_array().is_some_and(|r| r.len() == n))
}

/// Parses and validates a model document.
///
/// `H` is either a dense `n_types x n_types` array or a list of 1-based
/// `[i, j, value]` triplets with absent entries zero. When both readings
/// fit (three types, three triplets) the dense reading wins unless
/// `"H_format": "sparse"` is given.
pub fn load_model<T: Scalar>(text: &str) -> Result<LFModel<T>> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let n = doc.n_types;
    if n == 0 {
        return Err(parse_err("n_types must be positive"));
    }
    if doc.g.len() != n {
        return Err(parse_err(format!("g has {} entries, expected {n}", doc.g.len())));
    }
    let items = doc
        .h
        .as_array()
        .ok_or_else(|| parse_err("H must be an array"))?;
    let triplets = match doc.h_format.as_deref() {
        Some("dense") => parse_dense(items, n)?,
        Some("sparse") => parse_sparse(items, n)?,
        Some(other) => return Err(parse_err(format!("unknown H_format {other:?}"))),
        None if looks_dense(items, n) => parse_dense(items, n)?,
        None if looks_like_triplets(items, n) => parse_sparse(items, n)?,
        None => return Err(parse_err("H is neither a dense matrix nor a triplet list")),
    };
    let conv: Vec<(usize, usize, T)> = triplets
        .into_iter()
        .map(|(i, j, v)| (i, j, T::lit(v)))
        .collect();
    let h = SparseMatrix::from_triplets(n, &conv)
        .ok_or_else(|| parse_err("duplicate sparse H entry"))?;
    let g = doc.g.iter().map(|&x| T::lit(x)).collect();
    LFModel::new(h, g, T::lit(doc.m))
}

/// Serializes to the model file format. Sparse triplets are written when
/// fewer than half of the entries are nonzero.
pub fn model_to_json<T: Scalar>(model: &LFModel<T>) -> String {
    let n = model.n_types();
    let sparse = 2 * model.h.nnz() < n * n;
    let h = if sparse {
        Value::Array(
            model
                .h
                .entries()
                .map(|(i, j, v)| serde_json::json!([i + 1, j + 1, v.to_f64_lossy()]))
                .collect(),
        )
    } else {
        let dense = model.h.to_dense();
        serde_json::json!((0..n)
            .map(|i| dense.row(i).iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>())
            .collect::<Vec<_>>())
    };
    let doc = ModelDocument {
        n_types: n,
        m: model.m.to_f64_lossy(),
        g: model.g.iter().map(|v| v.to_f64_lossy()).collect(),
        h,
        h_format: sparse.then(|| "sparse".to_string()),
    };
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}
