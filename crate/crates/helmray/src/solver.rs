//! Complex sparse direct solve and small dense SVD utilities.
//!
//! The sparse solve is backed by faer's sparse LU with partial pivoting,
//! run sequentially so results are bit-identical across worker counts.

use crate::Complex64;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("matrix is structurally singular (empty pivot column {0})")]
    StructurallySingular(usize),
    #[error("matrix is numerically singular")]
    NumericallySingular,
    #[error("relative residual {residual:.3e} exceeds {limit:.3e}")]
    ResidualTooLarge { residual: f64, limit: f64 },
    #[error("system not finalized")]
    NotFinalized,
    #[error("matrix market: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Square complex sparse system `A x = b` in row-sorted CSR storage after
/// [`ComplexSparseSystem::finalize`].
#[derive(Debug, Clone)]
pub struct ComplexSparseSystem {
    pub n: usize,
    triplets: Vec<(usize, usize, Complex64)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
    finalized: bool,
    pub rhs: Vec<Complex64>,
}

/// Result of a direct solve: solution plus the achieved relative residual.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<Complex64>,
    pub relative_residual: f64,
}

impl ComplexSparseSystem {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        ComplexSparseSystem {
            n,
            triplets: Vec::new(),
            row_ptr: Vec::new(),
            col_idx: Vec::new(),
            values: Vec::new(),
            finalized: false,
            rhs: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.n && col < self.n);
        if value != Complex64::new(0.0, 0.0) {
            self.triplets.push((row, col, value));
        }
    }

    pub fn add_rhs(&mut self, row: usize, value: Complex64) {
        self.rhs[row] += value;
    }

    /// Append a batch of triplets; used by assembly to merge per-element
    /// buffers in deterministic element order.
    pub fn extend_triplets(&mut self, batch: impl IntoIterator<Item = (usize, usize, Complex64)>) {
        self.triplets.extend(batch);
    }

    /// Sort triplets row-major and merge duplicates into CSR storage.
    pub fn finalize(&mut self) {
        let mut trips = std::mem::take(&mut self.triplets);
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(trips.len());
        for (r, c, v) in trips {
            if let Some(last) = merged.last_mut() {
                if last.0 == r && last.1 == c {
                    last.2 += v;
                    continue;
                }
            }
            merged.push((r, c, v));
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..self.n {
            row_ptr[r + 1] += row_ptr[r];
        }
        self.col_idx = merged.iter().map(|t| t.1).collect();
        self.values = merged.iter().map(|t| t.2).collect();
        self.row_ptr = row_ptr;
        self.finalized = true;
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[usize], &[Complex64])> {
        (0..self.n).map(move |r| {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            (r, &self.col_idx[lo..hi], &self.values[lo..hi])
        })
    }

    /// Entry lookup (zero when absent). Only valid after finalize.
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.values[lo + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for (r, cols, vals) in self.rows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Direct sparse LU solve with partial pivoting. Deterministic:
    /// identical inputs give bit-identical outputs regardless of the rayon
    /// pool size.
    pub fn solve(&self) -> Result<SolveResult, SolveError> {
        if !self.finalized {
            return Err(SolveError::NotFinalized);
        }
        use faer::prelude::Solve;
        use faer::sparse::{SparseColMat, Triplet};
        let trips: Vec<Triplet<usize, usize, faer::c64>> = self
            .rows()
            .flat_map(|(r, cols, vals)| {
                cols.iter()
                    .zip(vals)
                    .map(move |(c, v)| Triplet::new(r, *c, faer::c64::new(v.re, v.im)))
            })
            .collect();
        let mat = SparseColMat::try_new_from_triplets(self.n, self.n, &trips)
            .map_err(|e| SolveError::Format(format!("triplet conversion: {e:?}")))?;
        faer::set_global_parallelism(faer::Par::Seq);
        let lu = mat.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => {
                SolveError::StructurallySingular(index)
            }
            faer::sparse::linalg::LuError::Generic(g) => {
                SolveError::Format(format!("factorization failed: {g:?}"))
            }
        })?;
        let b = faer::Mat::from_fn(self.n, 1, |i, _| faer::c64::new(self.rhs[i].re, self.rhs[i].im));
        let xm = lu.solve(&b);
        let x: Vec<Complex64> = (0..self.n).map(|i| Complex64::new(xm[(i, 0)].re, xm[(i, 0)].im)).collect();
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SolveError::NumericallySingular);
        }
        let ax = self.matvec(&x);
        let mut rnorm = 0.0f64;
        let mut bnorm = 0.0f64;
        for i in 0..self.n {
            rnorm += (ax[i] - self.rhs[i]).norm_sqr();
            bnorm += self.rhs[i].norm_sqr();
        }
        let relative_residual = if bnorm > 0.0 { (rnorm / bnorm).sqrt() } else { rnorm.sqrt() };
        let limit = 1e-8;
        if bnorm > 0.0 && relative_residual > limit {
            return Err(SolveError::ResidualTooLarge { residual: relative_residual, limit });
        }
        Ok(SolveResult { x, relative_residual })
    }

    /// Crude lower bound on the 1-norm condition number from a few probe
    /// solves; good enough to flag near-duplicate-direction systems.
    pub fn estimate_condition(&self) -> Option<f64> {
        if !self.finalized {
            return None;
        }
        let norm_a = (0..self.n)
            .map(|r| {
                let lo = self.row_ptr[r];
                let hi = self.row_ptr[r + 1];
                self.values[lo..hi].iter().map(|v| v.norm()).sum::<f64>()
            })
            .fold(0.0f64, f64::max);
        use faer::prelude::Solve;
        use faer::sparse::{SparseColMat, Triplet};
        let trips: Vec<Triplet<usize, usize, faer::c64>> = self
            .rows()
            .flat_map(|(r, cols, vals)| {
                cols.iter()
                    .zip(vals)
                    .map(move |(c, v)| Triplet::new(r, *c, faer::c64::new(v.re, v.im)))
            })
            .collect();
        let mat = SparseColMat::try_new_from_triplets(self.n, self.n, &trips).ok()?;
        faer::set_global_parallelism(faer::Par::Seq);
        let lu = mat.sp_lu().ok()?;
        let mut best = 0.0f64;
        for probe in 0..3u64 {
            let b = faer::Mat::from_fn(self.n, 1, |i, _| {
                // Deterministic pseudo-random +-1 probes.
                let h = (i as u64).wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(probe * 0x1234567);
                let s = if (h >> 13) & 1 == 0 { 1.0 } else { -1.0 };
                faer::c64::new(s / self.n as f64, 0.0)
            });
            let x = lu.solve(&b);
            let xn: f64 = (0..self.n).map(|i| x[(i, 0)].norm()).sum();
            best = best.max(xn);
        }
        Some(norm_a * best)
    }

    /// Write in Matrix Market coordinate complex general format, 1-based.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<(), SolveError> {
        if !self.finalized {
            return Err(SolveError::NotFinalized);
        }
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for (r, cols, vals) in self.rows() {
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e} {:.17e}", r + 1, c + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// Read a Matrix Market coordinate complex general matrix (rhs zero).
    pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<Self, SolveError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| SolveError::Format("empty file".into()))??;
        let h = header.to_lowercase();
        if !h.starts_with("%%matrixmarket matrix coordinate complex general") {
            return Err(SolveError::Format(format!("unsupported header: {header}")));
        }
        let mut size_line = None;
        for line in lines.by_ref() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('%') {
                continue;
            }
            size_line = Some(line);
            break;
        }
        let size_line = size_line.ok_or_else(|| SolveError::Format("missing size line".into()))?;
        let dims: Vec<usize> = size_line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| SolveError::Format(e.to_string())))
            .collect::<Result<_, _>>()?;
        if dims.len() != 3 || dims[0] != dims[1] {
            return Err(SolveError::Format("expected square matrix size line".into()));
        }
        let mut sys = ComplexSparseSystem::new(dims[0]);
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let toks: Vec<&str> = t.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(SolveError::Format(format!("bad entry line: {t}")));
            }
            let r: usize = toks[0].parse().map_err(|e: std::num::ParseIntError| SolveError::Format(e.to_string()))?;
            let c: usize = toks[1].parse().map_err(|e: std::num::ParseIntError| SolveError::Format(e.to_string()))?;
            let re: f64 = toks[2].parse().map_err(|e: std::num::ParseFloatError| SolveError::Format(e.to_string()))?;
            let im: f64 = toks[3].parse().map_err(|e: std::num::ParseFloatError| SolveError::Format(e.to_string()))?;
            sys.add(r - 1, c - 1, Complex64::new(re, im));
            seen += 1;
        }
        if seen != dims[2] {
            return Err(SolveError::Format(format!("expected {} entries, got {seen}", dims[2])));
        }
        sys.finalize();
        Ok(sys)
    }
}

/// SVD of a small dense real matrix by one-sided Jacobi rotations.
#[derive(Debug, Clone)]
pub struct DenseSvd {
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
    /// Right singular vectors; `right_vectors[k]` has length n and pairs
    /// with `singular_values[k]`.
    pub right_vectors: Vec<Vec<f64>>,
}

/// One-shot Jacobi SVD for matrices with m, n <= 64 (rows are observations).
pub fn dense_svd(a: &[Vec<f64>]) -> DenseSvd {
    let m = a.len();
    assert!(m >= 1, "empty matrix");
    let n = a[0].len();
    assert!(m <= 64 && n <= 64, "dense_svd is for small matrices only");
    // Work on columns: u[j] is the j-th column of the rotated A.
    let mut u = vec![vec![0.0f64; m]; n];
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "ragged matrix");
        for j in 0..n {
            u[j][i] = row[j];
        }
    }
    let mut v = vec![vec![0.0f64; n]; n];
    for (j, col) in v.iter_mut().enumerate() {
        col[j] = 1.0;
    }
    let frob: f64 = u.iter().flat_map(|c| c.iter().map(|x| x * x)).sum::<f64>().sqrt();
    let tol = 1e-15 * frob.max(1e-300);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    app += u[p][i] * u[p][i];
                    aqq += u[q][i] * u[q][i];
                    apq += u[p][i] * u[q][i];
                }
                if apq.abs() <= tol * (app.sqrt() * aqq.sqrt()).max(1e-300) {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[p][i];
                    let uq = u[q][i];
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = u.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());
    DenseSvd {
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        right_vectors: order.iter().map(|&j| v[j].clone()).collect(),
    }
}
