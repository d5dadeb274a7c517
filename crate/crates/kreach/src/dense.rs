//! Small dense matrices and the matrix exponential.
//!
//! Everything here operates on k×k projections (Hessenberg/tridiagonal H from
//! the Krylov iterations) or on n×n systems small enough to densify. The
//! exponential uses scaling-and-squaring with a diagonal Padé approximant of
//! order 13, selecting lower orders when the 1-norm permits.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut values = Vec::with_capacity(r * c);
        for (idx, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Dimension(format!(
                    "ragged dense matrix: row 0 has {c} entries, row {idx} has {}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(DenseMatrix { rows: r, cols: c, values })
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "dense matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (r, &x) in v.iter().enumerate() {
            self.set(r, c, x);
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        t
    }

    pub fn scaled(&self, f: f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * f).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.values[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.values[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.values[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mat_vec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.values[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[r] = acc;
        }
        out
    }

    /// Max absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                sums[c] += self.values[r * self.cols + c].abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Solve self · X = rhs by LU with partial pivoting. self must be square.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        assert!(self.is_square());
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let nrhs = rhs.cols;
        let mut lu = self.values.clone();
        let mut x = rhs.values.clone();
        for col in 0..n {
            // pivot selection
            let mut p = col;
            let mut best = lu[col * n + col].abs();
            for r in col + 1..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::Numerical("singular matrix in LU solve".into()));
            }
            if p != col {
                for c in 0..n {
                    lu.swap(col * n + c, p * n + c);
                }
                for c in 0..nrhs {
                    x.swap(col * nrhs + c, p * nrhs + c);
                }
            }
            let piv = lu[col * n + col];
            for r in col + 1..n {
                let f = lu[r * n + col] / piv;
                if f == 0.0 {
                    continue;
                }
                lu[r * n + col] = 0.0;
                for c in col + 1..n {
                    lu[r * n + c] -= f * lu[col * n + c];
                }
                for c in 0..nrhs {
                    x[r * nrhs + c] -= f * x[col * nrhs + c];
                }
            }
        }
        for col in (0..n).rev() {
            let piv = lu[col * n + col];
            for c in 0..nrhs {
                x[col * nrhs + c] /= piv;
            }
            for r in 0..col {
                let f = lu[r * n + col];
                if f == 0.0 {
                    continue;
                }
                for c in 0..nrhs {
                    x[r * nrhs + c] -= f * x[col * nrhs + c];
                }
            }
        }
        DenseMatrix::from_vec(n, nrhs, x)
    }
}

// Diagonal Padé coefficients; PADE13 with 1-norm thresholds for order selection.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495_585_217_958_292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504_178_996_162_932e-1;
const THETA9: f64 = 2.097_847_961_257_068;
const THETA13: f64 = 5.371_920_351_148_152;

/// Sum even and odd coefficient parts: U = M·(odd part), V = even part,
/// evaluated on the precomputed even powers of M.
fn pade_uv(m: &DenseMatrix, powers: &[&DenseMatrix], coeffs: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let n = m.rows();
    let mut u_inner = DenseMatrix::zeros(n, n);
    let mut v = DenseMatrix::zeros(n, n);
    // powers[p] = M^{2p}; coeffs[2p] weight V, coeffs[2p+1] weight U-inner.
    for (p, pw) in powers.iter().enumerate() {
        v = v.add(&pw.scaled(coeffs[2 * p]));
        u_inner = u_inner.add(&pw.scaled(coeffs[2 * p + 1]));
    }
    (m.matmul(&u_inner), v)
}

/// Matrix exponential e^M via scaling-and-squaring Padé.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("expm needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::Numerical("expm input has non-finite entries".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let norm = m.norm_1();
    let ident = DenseMatrix::identity(n);

    let (u, v, squarings) = if norm <= THETA9 {
        let m2 = m.matmul(m);
        let m4 = m2.matmul(&m2);
        let m6 = m4.matmul(&m2);
        let m8 = m4.matmul(&m4);
        let (coeffs, powers): (&[f64], Vec<&DenseMatrix>) = if norm <= THETA3 {
            (&PADE3, vec![&ident, &m2])
        } else if norm <= THETA5 {
            (&PADE5, vec![&ident, &m2, &m4])
        } else if norm <= THETA7 {
            (&PADE7, vec![&ident, &m2, &m4, &m6])
        } else {
            (&PADE9, vec![&ident, &m2, &m4, &m6, &m8])
        };
        let (u, v) = pade_uv(m, &powers, coeffs);
        (u, v, 0u32)
    } else {
        let s = if norm > THETA13 {
            ((norm / THETA13).log2().ceil() as u32).max(1)
        } else {
            0
        };
        let a = m.scaled(0.5f64.powi(s as i32));
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let b = &PADE13;
        // order 13 splits the polynomial around A^6 to bound the power chain
        let w1_inner = a6
            .scaled(b[13])
            .add(&a4.scaled(b[11]))
            .add(&a2.scaled(b[9]));
        let w2 = a6
            .scaled(b[7])
            .add(&a4.scaled(b[5]))
            .add(&a2.scaled(b[3]))
            .add(&ident.scaled(b[1]));
        let u = a.matmul(&a6.matmul(&w1_inner).add(&w2));
        let z1_inner = a6
            .scaled(b[12])
            .add(&a4.scaled(b[10]))
            .add(&a2.scaled(b[8]));
        let v = a6
            .matmul(&z1_inner)
            .add(&a6.scaled(b[6]))
            .add(&a4.scaled(b[4]))
            .add(&a2.scaled(b[2]))
            .add(&ident.scaled(b[0]));
        (u, v, s)
    };

    // (V - U) X = (V + U)
    let mut result = v.sub(&u).solve(&v.add(&u))?;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}

/// First column of e^{Mt}.
///
/// Formed via a single expm; callers that need this column on a whole time
/// grid should instead propagate with one exponential of the grid step (see
/// the basis-sequence driver), which reuses the factorization across times.
pub fn expm_action_column(m: &DenseMatrix, t: f64) -> Result<Vec<f64>> {
    let e = expm(&m.scaled(t))?;
    Ok(e.column(0))
}

/// h(t) = (k,1) entry of e^{−tH} for a k×k upper-Hessenberg H.
pub fn h_entry(h: &DenseMatrix, t: f64) -> Result<f64> {
    if !h.is_square() || h.rows() == 0 {
        return Err(Error::Dimension("h_entry needs a nonempty square matrix".into()));
    }
    let e = expm(&h.scaled(-t))?;
    Ok(e.get(h.rows() - 1, 0))
}

/// ∫₀^τ |h(t)| dt with h(t) the (k,1) entry of e^{−tH}.
///
/// Composite Simpson on a uniform grid, doubling the resolution until two
/// successive estimates agree to rel_tol. Grid values of e^{−tH}e₁ come from
/// repeated application of one per-level step exponential rather than an expm
/// per node.
pub fn integrate_abs_h(h: &DenseMatrix, tau: f64, rel_tol: f64) -> Result<f64> {
    if !h.is_square() || h.rows() == 0 {
        return Err(Error::Dimension("integrate_abs_h needs a nonempty square matrix".into()));
    }
    if tau < 0.0 {
        return Err(Error::Dimension("integrate_abs_h needs tau >= 0".into()));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let k = h.rows();
    let mut intervals = 64usize;
    let mut prev: Option<f64> = None;
    loop {
        let step = tau / intervals as f64;
        let prop = expm(&h.scaled(-step))?;
        let mut w: Vec<f64> = vec![0.0; k];
        w[0] = 1.0;
        // Simpson weights 1,4,2,4,…,4,1 scaled by step/3
        let mut acc = w[k - 1].abs();
        for node in 1..intervals {
            w = prop.mat_vec(&w);
            let weight = if node % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * w[k - 1].abs();
        }
        w = prop.mat_vec(&w);
        acc += w[k - 1].abs();
        let estimate = acc * step / 3.0;
        if let Some(p) = prev {
            if (estimate - p).abs() <= rel_tol * estimate.abs().max(1e-300) {
                return Ok(estimate);
            }
        }
        prev = Some(estimate);
        if intervals >= 1 << 18 {
            return Err(Error::Numerical(format!(
                "quadrature of |h(t)| did not converge; partial estimate {estimate:e}"
            )));
        }
        intervals *= 2;
    }
}
