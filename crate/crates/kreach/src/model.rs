//! Problem representation: sparse system matrices, linear constraint sets,
//! verification problems, and their on-disk formats (MatrixMarket matrices,
//! JSON problem files).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
///
/// Invariants: `row_offsets` has `n_rows + 1` entries, column indices are
/// strictly increasing within each row, and no explicit zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets. Duplicate coordinates are
    /// summed; entries that are (or sum to) zero are dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Dimension(format!(
                    "triplet ({r},{c}) outside {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Invalid(format!("non-finite entry at ({r},{c})")));
            }
            entries.push((r, c, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(SparseMatrix { n_rows, n_cols, row_offsets, col_indices, values })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "ragged matrix: row 0 has {n_cols} entries, row {r} has {}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row, ascending by column.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d.set(r, c, v);
            }
        }
        d
    }

    pub fn negated(&self) -> Self {
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut best = 0.0f64;
        for r in 0..self.n_rows {
            let (_, vals) = self.row(r);
            best = best.max(vals.iter().map(|v| v.abs()).sum());
        }
        best
    }

    /// Max absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut sums = vec![0.0f64; self.n_cols];
        for (&c, &v) in self.col_indices.iter().zip(&self.values) {
            sums[c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub(crate) fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            out[r] = acc;
        }
    }
}

/// Sparse matrix–vector product. Accumulation is row-major in ascending
/// column order, so results are bitwise deterministic.
pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.n_cols {
        return Err(Error::Dimension(format!(
            "spmv: matrix has {} columns, vector has {} entries",
            a.n_cols,
            x.len()
        )));
    }
    let mut out = vec![0.0; a.n_rows];
    a.mul_vec_into(x, &mut out);
    Ok(out)
}

pub fn transpose(a: &SparseMatrix) -> SparseMatrix {
    // counting sort by column; within a column, rows appear in ascending
    // order because the source is scanned row-major
    let nnz = a.nnz();
    let mut row_offsets = vec![0usize; a.n_cols + 1];
    for &c in &a.col_indices {
        row_offsets[c + 1] += 1;
    }
    for c in 0..a.n_cols {
        row_offsets[c + 1] += row_offsets[c];
    }
    let mut col_indices = vec![0usize; nnz];
    let mut values = vec![0.0f64; nnz];
    let mut cursor = row_offsets.clone();
    for r in 0..a.n_rows {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            let pos = cursor[c];
            cursor[c] += 1;
            col_indices[pos] = r;
            values[pos] = v;
        }
    }
    SparseMatrix { n_rows: a.n_cols, n_cols: a.n_rows, row_offsets, col_indices, values }
}

/// Entrywise |A − Aᵀ| ≤ tol. Errors on non-square input.
pub fn is_symmetric(a: &SparseMatrix, tol: f64) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "symmetry check needs a square matrix, got {}x{}",
            a.n_rows, a.n_cols
        )));
    }
    let t = transpose(a);
    for r in 0..a.n_rows {
        let (ac, av) = a.row(r);
        let (tc, tv) = t.row(r);
        let (mut i, mut j) = (0usize, 0usize);
        while i < ac.len() || j < tc.len() {
            let (va, vt) = match (ac.get(i), tc.get(j)) {
                (Some(&ca), Some(&ct)) if ca == ct => {
                    let pair = (av[i], tv[j]);
                    i += 1;
                    j += 1;
                    pair
                }
                (Some(&ca), Some(&ct)) if ca < ct => {
                    let pair = (av[i], 0.0);
                    i += 1;
                    pair
                }
                (Some(_), Some(_)) | (None, Some(_)) => {
                    let pair = (0.0, tv[j]);
                    j += 1;
                    pair
                }
                (Some(_), None) => {
                    let pair = (av[i], 0.0);
                    i += 1;
                    pair
                }
                (None, None) => break,
            };
            if (va - vt).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Lift ẋ = Ax + b to the linear system ẋ' = A'x' on n+1 variables, where
/// the extra variable is the constant 1: A' carries b in its last column and
/// has a zero last row.
pub fn affine_to_linear(a: &SparseMatrix, b: &[f64]) -> Result<SparseMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "affine lifting needs a square matrix, got {}x{}",
            a.n_rows, a.n_cols
        )));
    }
    if b.len() != a.n_rows {
        return Err(Error::Dimension(format!(
            "affine lifting: matrix is {0}x{0} but b has {1} entries",
            a.n_rows,
            b.len()
        )));
    }
    let n = a.n_rows;
    let mut triplets = Vec::with_capacity(a.nnz() + n);
    for r in 0..n {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            triplets.push((r, c, v));
        }
        if b[r] != 0.0 {
            triplets.push((r, n, b[r]));
        }
    }
    SparseMatrix::from_triplets(n + 1, n + 1, &triplets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// a·x ≤ rhs
    Le,
    /// a·x = rhs
    Eq,
}

/// Rows a_r·x {≤,=} rhs_r over a fixed variable width.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraintSet {
    matrix: DenseMatrix,
    kinds: Vec<ConstraintKind>,
    rhs: Vec<f64>,
}

impl LinearConstraintSet {
    pub fn new(matrix: DenseMatrix, kinds: Vec<ConstraintKind>, rhs: Vec<f64>) -> Result<Self> {
        if kinds.len() != matrix.rows() || rhs.len() != matrix.rows() {
            return Err(Error::Dimension(format!(
                "constraint set: {} rows but {} kinds and {} rhs entries",
                matrix.rows(),
                kinds.len(),
                rhs.len()
            )));
        }
        if !matrix.is_finite() || rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite constraint coefficient".into()));
        }
        Ok(LinearConstraintSet { matrix, kinds, rhs })
    }

    pub fn empty(width: usize) -> Self {
        LinearConstraintSet { matrix: DenseMatrix::zeros(0, width), kinds: vec![], rhs: vec![] }
    }

    /// Box constraints: per variable, lo = hi becomes one equality row,
    /// otherwise −z ≤ −lo and z ≤ hi.
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        let w = intervals.len();
        let mut rows = Vec::new();
        let mut kinds = Vec::new();
        let mut rhs = Vec::new();
        for (j, &(lo, hi)) in intervals.iter().enumerate() {
            if lo > hi {
                return Err(Error::Invalid(format!("interval [{lo}, {hi}] for variable {} is empty", j + 1)));
            }
            let mut unit = vec![0.0; w];
            if lo == hi {
                unit[j] = 1.0;
                rows.push(unit);
                kinds.push(ConstraintKind::Eq);
                rhs.push(lo);
            } else {
                let mut neg = unit.clone();
                neg[j] = -1.0;
                rows.push(neg);
                kinds.push(ConstraintKind::Le);
                rhs.push(-lo);
                unit[j] = 1.0;
                rows.push(unit);
                kinds.push(ConstraintKind::Le);
                rhs.push(hi);
            }
        }
        LinearConstraintSet::new(DenseMatrix::from_rows(&rows)?, kinds, rhs)
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    pub fn coeff_row(&self, r: usize) -> &[f64] {
        self.matrix.row(r)
    }

    pub fn kind(&self, r: usize) -> ConstraintKind {
        self.kinds[r]
    }

    pub fn rhs(&self, r: usize) -> f64 {
        self.rhs[r]
    }

    /// Largest violation over all rows; 0 when satisfied.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.width());
        let mut worst = 0.0f64;
        for r in 0..self.len() {
            let lhs: f64 = self.coeff_row(r).iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match self.kinds[r] {
                ConstraintKind::Le => (lhs - self.rhs[r]).max(0.0),
                ConstraintKind::Eq => (lhs - self.rhs[r]).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }
}

/// Time-bounded safety verification problem for ẋ = Ax with outputs y = Cx
/// and initial states x₀ = E·z₀, z₀ ∈ init set.
#[derive(Clone, Debug)]
pub struct VerificationProblem {
    pub a_matrix: SparseMatrix,
    /// n×i matrix E stacking the initial-space directions.
    pub init_space: DenseMatrix,
    /// Constraints over z (width i).
    pub init_constraints: LinearConstraintSet,
    /// o×n output projection C.
    pub output_matrix: DenseMatrix,
    /// Constraints over y (width o). None means a plot-only problem.
    pub unsafe_constraints: Option<LinearConstraintSet>,
    pub step: f64,
    pub time_bound: f64,
    n_steps: usize,
}

impl VerificationProblem {
    pub fn new(
        a_matrix: SparseMatrix,
        init_space: DenseMatrix,
        init_constraints: LinearConstraintSet,
        output_matrix: DenseMatrix,
        unsafe_constraints: Option<LinearConstraintSet>,
        step: f64,
        time_bound: f64,
    ) -> Result<Self> {
        if !a_matrix.is_square() {
            return Err(Error::Dimension(format!(
                "system matrix must be square, got {}x{}",
                a_matrix.n_rows(),
                a_matrix.n_cols()
            )));
        }
        let n = a_matrix.n_rows();
        if init_space.rows() != n {
            return Err(Error::Dimension(format!(
                "init space has {} rows but the system has {n} states",
                init_space.rows()
            )));
        }
        if init_space.cols() == 0 {
            return Err(Error::Invalid("init space has no columns".into()));
        }
        if init_constraints.width() != init_space.cols() {
            return Err(Error::Dimension(format!(
                "init constraints are over {} variables but init space has {} columns",
                init_constraints.width(),
                init_space.cols()
            )));
        }
        if output_matrix.cols() != n {
            return Err(Error::Dimension(format!(
                "output matrix has {} columns but the system has {n} states",
                output_matrix.cols()
            )));
        }
        if output_matrix.rows() == 0 {
            return Err(Error::Invalid("output matrix has no rows".into()));
        }
        if let Some(u) = &unsafe_constraints {
            if u.width() != output_matrix.rows() {
                return Err(Error::Dimension(format!(
                    "unsafe constraints are over {} variables but there are {} outputs",
                    u.width(),
                    output_matrix.rows()
                )));
            }
            if u.is_empty() {
                return Err(Error::Invalid(
                    "unsafe constraint set is present but empty; omit it for plot-only problems".into(),
                ));
            }
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Invalid(format!("step must be positive, got {step}")));
        }
        if !(time_bound.is_finite() && time_bound > 0.0) {
            return Err(Error::Invalid(format!("time bound must be positive, got {time_bound}")));
        }
        let ratio = time_bound / step;
        let n_steps = ratio.round();
        if n_steps < 1.0 || (ratio - n_steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Invalid(format!(
                "time bound {time_bound} is not a whole number of steps of {step}"
            )));
        }
        Ok(VerificationProblem {
            a_matrix,
            init_space,
            init_constraints,
            output_matrix,
            unsafe_constraints,
            step,
            time_bound,
            n_steps: n_steps as usize,
        })
    }

    pub fn n(&self) -> usize {
        self.a_matrix.n_rows()
    }

    pub fn init_dim(&self) -> usize {
        self.init_space.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.output_matrix.rows()
    }

    /// Number s of steps; the checked times are jδ for j = 0..=s.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// x₀ = E·z₀.
    pub fn initial_state(&self, z0: &[f64]) -> Vec<f64> {
        self.init_space.mat_vec(z0)
    }
}

// ---------------------------------------------------------------------------
// MatrixMarket I/O
// ---------------------------------------------------------------------------

/// Read a MatrixMarket coordinate file (real or integer entries, general or
/// symmetric). Symmetric files are expanded to full storage; duplicate
/// coordinates are summed.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::parse(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>' header"));
    }
    if fields[2] != "coordinate" {
        return Err(Error::parse(path, 1, format!("unsupported format '{}': only coordinate is supported", fields[2])));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(Error::parse(path, 1, format!("unsupported field '{}': only real or integer entries are supported", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::parse(path, 1, format!("unsupported symmetry '{other}': only general or symmetric")));
        }
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut entry_lines = 0usize;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if toks.len() != 3 {
                    return Err(Error::parse(path, line_no, "size line must be 'rows cols nnz'"));
                }
                let parse = |s: &str| -> Result<usize> {
                    s.parse::<usize>().map_err(|_| Error::parse(path, line_no, format!("bad integer '{s}'")))
                };
                let (r, c, nnz) = (parse(toks[0])?, parse(toks[1])?, parse(toks[2])?);
                size = Some((r, c, nnz));
                triplets.reserve(if symmetric { 2 * nnz } else { nnz });
            }
            Some((n_rows, n_cols, nnz)) => {
                if entry_lines >= nnz {
                    return Err(Error::parse(path, line_no, format!("more than the declared {nnz} entries")));
                }
                if toks.len() != 3 {
                    return Err(Error::parse(path, line_no, "entry line must be 'row col value'"));
                }
                let r: usize = toks[0]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad row index '{}'", toks[0])))?;
                let c: usize = toks[1]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad column index '{}'", toks[1])))?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad value '{}'", toks[2])))?;
                if r == 0 || c == 0 || r > n_rows || c > n_cols {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("entry ({r},{c}) outside declared {n_rows}x{n_cols} matrix"),
                    ));
                }
                entry_lines += 1;
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (n_rows, n_cols, declared) = size.ok_or_else(|| Error::parse(path, 1, "missing size line"))?;
    if entry_lines != declared {
        return Err(Error::parse(
            path,
            0,
            format!("declared {declared} entries but found {entry_lines}"),
        ));
    }
    SparseMatrix::from_triplets(n_rows, n_cols, &triplets)
}

/// Write in MatrixMarket coordinate/real/general form. Values are printed
/// with 17 significant digits so a load round-trips bit-identically.
pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(64 + a.nnz() * 32);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", a.n_rows(), a.n_cols(), a.nnz()));
    for r in 0..a.n_rows() {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            out.push_str(&format!("{} {} {:.16e}\n", r + 1, c + 1, v));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Problem JSON I/O
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixSource {
    /// Path to a MatrixMarket file, relative to the problem file.
    Path(String),
    /// Inline dense rows.
    Inline(Vec<Vec<f64>>),
}

#[derive(Serialize, Deserialize)]
struct ConstraintsJson {
    mat: Vec<Vec<f64>>,
    kinds: Vec<String>,
    rhs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    a_matrix: MatrixSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_vector: Option<Vec<f64>>,
    init_space: MatrixSource,
    init_constraints: ConstraintsJson,
    output_matrix: MatrixSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unsafe_constraints: Option<ConstraintsJson>,
    step: f64,
    time_bound: f64,
}

fn constraints_from_json(c: &ConstraintsJson) -> Result<LinearConstraintSet> {
    let mut kinds = Vec::with_capacity(c.kinds.len());
    for k in &c.kinds {
        match k.as_str() {
            "le" => kinds.push(ConstraintKind::Le),
            "eq" => kinds.push(ConstraintKind::Eq),
            other => {
                return Err(Error::Invalid(format!("constraint kind must be 'le' or 'eq', got '{other}'")));
            }
        }
    }
    LinearConstraintSet::new(DenseMatrix::from_rows(&c.mat)?, kinds, c.rhs.clone())
}

fn constraints_to_json(c: &LinearConstraintSet) -> ConstraintsJson {
    ConstraintsJson {
        mat: (0..c.len()).map(|r| c.coeff_row(r).to_vec()).collect(),
        kinds: (0..c.len())
            .map(|r| match c.kind(r) {
                ConstraintKind::Le => "le".to_string(),
                ConstraintKind::Eq => "eq".to_string(),
            })
            .collect(),
        rhs: (0..c.len()).map(|r| c.rhs(r)).collect(),
    }
}

fn sparse_from_source(src: &MatrixSource, base: &Path) -> Result<SparseMatrix> {
    match src {
        MatrixSource::Path(p) => load_matrix_market(base.join(p)),
        MatrixSource::Inline(rows) => SparseMatrix::from_dense(rows),
    }
}

fn dense_from_source(src: &MatrixSource, base: &Path) -> Result<DenseMatrix> {
    match src {
        MatrixSource::Path(p) => Ok(load_matrix_market(base.join(p))?.to_dense()),
        MatrixSource::Inline(rows) => DenseMatrix::from_rows(rows),
    }
}

/// Load a problem file. When a `b_vector` is present, the affine system is
/// lifted to a linear one: the state gains a constant-one variable, the init
/// space gains a matching column, and the init constraints pin it to 1.
/// After construction the initial set is checked to be nonempty and bounded.
pub fn load_problem(path: impl AsRef<Path>) -> Result<VerificationProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ProblemJson =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();

    let mut a = sparse_from_source(&file.a_matrix, &base)?;
    let mut init_space = dense_from_source(&file.init_space, &base)?;
    let mut init_constraints = constraints_from_json(&file.init_constraints)?;
    let mut output = dense_from_source(&file.output_matrix, &base)?;

    if let Some(b) = &file.b_vector {
        a = affine_to_linear(&a, b)?;
        let n = init_space.rows();
        let i = init_space.cols();
        let mut lifted_space = DenseMatrix::zeros(n + 1, i + 1);
        for r in 0..n {
            for c in 0..i {
                lifted_space.set(r, c, init_space.get(r, c));
            }
        }
        lifted_space.set(n, i, 1.0);
        init_space = lifted_space;

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(init_constraints.len() + 1);
        let mut kinds = Vec::with_capacity(init_constraints.len() + 1);
        let mut rhs = Vec::with_capacity(init_constraints.len() + 1);
        for r in 0..init_constraints.len() {
            let mut row = init_constraints.coeff_row(r).to_vec();
            row.push(0.0);
            rows.push(row);
            kinds.push(init_constraints.kind(r));
            rhs.push(init_constraints.rhs(r));
        }
        let mut pin = vec![0.0; i + 1];
        pin[i] = 1.0;
        rows.push(pin);
        kinds.push(ConstraintKind::Eq);
        rhs.push(1.0);
        init_constraints = LinearConstraintSet::new(DenseMatrix::from_rows(&rows)?, kinds, rhs)?;

        let o = output.rows();
        let mut lifted_out = DenseMatrix::zeros(o, n + 1);
        for r in 0..o {
            for c in 0..n {
                lifted_out.set(r, c, output.get(r, c));
            }
        }
        output = lifted_out;
    }

    let unsafe_constraints = match &file.unsafe_constraints {
        Some(u) => Some(constraints_from_json(u)?),
        None => None,
    };

    let problem = VerificationProblem::new(
        a,
        init_space,
        init_constraints,
        output,
        unsafe_constraints,
        file.step,
        file.time_bound,
    )?;
    crate::lp::check_initial_set(&problem)?;
    Ok(problem)
}

/// Load a standalone constraint-set file: {"mat": [[…]], "kinds": ["le"|"eq", …], "rhs": […]}.
pub fn load_constraints(path: impl AsRef<Path>) -> Result<LinearConstraintSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ConstraintsJson =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    constraints_from_json(&file)
}

/// Write `problem.json` (plus MatrixMarket side files for systems with more
/// than `inline_limit` states) into `dir`. Returns the path of the JSON file.
pub fn save_problem(problem: &VerificationProblem, dir: impl AsRef<Path>, inline_limit: usize) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = problem.n();

    let dense_rows = |m: &DenseMatrix| -> Vec<Vec<f64>> { (0..m.rows()).map(|r| m.row(r).to_vec()).collect() };

    let (a_src, init_src, out_src) = if n <= inline_limit {
        (
            MatrixSource::Inline(dense_rows(&problem.a_matrix.to_dense())),
            MatrixSource::Inline(dense_rows(&problem.init_space)),
            MatrixSource::Inline(dense_rows(&problem.output_matrix)),
        )
    } else {
        write_matrix_market(dir.join("a_matrix.mtx"), &problem.a_matrix)?;
        let init_sparse = SparseMatrix::from_dense(&dense_rows(&problem.init_space))?;
        write_matrix_market(dir.join("init_space.mtx"), &init_sparse)?;
        let out_sparse = SparseMatrix::from_dense(&dense_rows(&problem.output_matrix))?;
        write_matrix_market(dir.join("output_matrix.mtx"), &out_sparse)?;
        (
            MatrixSource::Path("a_matrix.mtx".into()),
            MatrixSource::Path("init_space.mtx".into()),
            MatrixSource::Path("output_matrix.mtx".into()),
        )
    };

    let file = ProblemJson {
        a_matrix: a_src,
        b_vector: None,
        init_space: init_src,
        init_constraints: constraints_to_json(&problem.init_constraints),
        output_matrix: out_src,
        unsafe_constraints: problem.unsafe_constraints.as_ref().map(constraints_to_json),
        step: problem.step,
        time_bound: problem.time_bound,
    };
    let json_path = dir.join("problem.json");
    let text = serde_json::to_string_pretty(&file).expect("problem serialization cannot fail");
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok(json_path)
}
