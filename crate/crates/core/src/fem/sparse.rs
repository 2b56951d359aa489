//! Compressed-column matrices with a fixed pattern and a cached symbolic LU.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Mat;

use crate::error::{Error, Result};

/// Sorted compressed-column sparsity pattern of a square matrix.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic_lu: OnceLock<SymbolicLu<usize>>,
}

impl SparsityPattern {
    /// Builds the pattern from (row, col) pairs; duplicates are merged.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c) in entries {
            assert!(r < n && c < n, "entry ({r}, {c}) outside {n} x {n}");
            cols[c].push(r);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for mut col in cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(&col);
            col_ptr.push(row_idx.len());
        }
        SparsityPattern { n, col_ptr, row_idx, symbolic_lu: OnceLock::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Index into the value array of entry (row, col).
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.col_ptr[col];
        let rows = &self.row_idx[start..self.col_ptr[col + 1]];
        rows.binary_search(&row).ok().map(|k| start + k)
    }

    pub fn column(&self, col: usize) -> std::ops::Range<usize> {
        self.col_ptr[col]..self.col_ptr[col + 1]
    }

    pub fn row_of(&self, pos: usize) -> usize {
        self.row_idx[pos]
    }

    fn symbolic(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx)
    }

    fn symbolic_lu(&self) -> Result<SymbolicLu<usize>> {
        if let Some(s) = self.symbolic_lu.get() {
            return Ok(s.clone());
        }
        let s = SymbolicLu::try_new(self.symbolic())
            .map_err(|e| Error::Singular { dofs: self.n, detail: format!("symbolic analysis failed: {e:?}") })?;
        Ok(self.symbolic_lu.get_or_init(|| s).clone())
    }
}

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        SparseMatrix { pattern, values: vec![0.0; nnz] }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let pattern = Arc::new(SparsityPattern::from_entries(n, triplets.iter().map(|&(r, c, _)| (r, c))));
        let mut m = SparseMatrix::zeros(pattern);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` to an entry that must be in the pattern.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let pos = self.pattern.position(row, col).unwrap_or_else(|| panic!("({row}, {col}) not in pattern"));
        self.values[pos] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        let mut y = vec![0.0; self.n()];
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for pos in self.pattern.column(c) {
                y[self.pattern.row_idx[pos]] += self.values[pos] * xc;
            }
        }
        y
    }

    /// Largest |A_ij - A_ji| over the pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.n() {
            for pos in self.pattern.column(c) {
                let r = self.pattern.row_idx[pos];
                worst = worst.max((self.values[pos] - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn has_nan(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    /// Rows (equivalently columns, for symmetric patterns) whose stored
    /// values are all zero.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&c| self.pattern.column(c).all(|p| self.values[p] == 0.0))
            .collect()
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(self.pattern.symbolic(), &self.values)
    }

    /// Numeric LU factorization, reusing the symbolic analysis of the pattern.
    pub fn factor(&self) -> Result<Factorization> {
        if self.has_nan() {
            return Err(Error::Assembly("matrix contains NaN".into()));
        }
        let symbolic = self.pattern.symbolic_lu()?;
        let lu = Lu::try_new_with_symbolic(symbolic, self.as_faer()).map_err(|e| {
            let detail = match e {
                LuError::SymbolicSingular { index } => format!("no pivot at step {index}"),
                LuError::Generic(g) => format!("{g:?}"),
            };
            self.singular(detail)
        })?;
        Ok(Factorization { matrix: self.clone(), lu })
    }

    fn singular(&self, detail: String) -> Error {
        let empty = self.empty_columns();
        let shown: Vec<String> = empty.iter().take(10).map(|c| c.to_string()).collect();
        let detail = if empty.is_empty() {
            detail
        } else {
            format!("{detail}; {} empty rows/columns (first: {})", empty.len(), shown.join(", "))
        };
        Error::Singular { dofs: self.n(), detail }
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n(), self.n(), self.pattern.nnz())?;
        for c in 0..self.n() {
            for pos in self.pattern.column(c) {
                writeln!(w, "{} {} {:.17e}", self.pattern.row_idx[pos] + 1, c + 1, self.values[pos])?;
            }
        }
        Ok(())
    }
}

/// Relative residual accepted by [`Factorization::solve`].
pub const SOLVE_TOLERANCE: f64 = 1e-9;

pub struct Factorization {
    matrix: SparseMatrix,
    lu: Lu<usize, f64>,
}

impl Factorization {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves with one step of iterative refinement. The material
    /// coefficients span nine orders of magnitude, and the plain LU solution
    /// is too noisy for finite-difference checks on fluid elements.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.n();
        if rhs.len() != n {
            return Err(Error::invalid(format!("rhs has length {}, system has {n} dofs", rhs.len())));
        }
        let rhs_norm = norm(rhs);
        if rhs_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.raw_solve(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(self.matrix.singular("non-finite solution".into()));
        }
        let tol = SOLVE_TOLERANCE * rhs_norm;
        let dx = self.raw_solve(&residual(&self.matrix, &x, rhs));
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        let r = norm(&residual(&self.matrix, &x, rhs));
        if !(r <= tol) {
            return Err(Error::SolveAccuracy { residual: r / rhs_norm, tolerance: SOLVE_TOLERANCE });
        }
        Ok(x)
    }
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
