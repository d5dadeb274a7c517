//! Krylov-subspace simulation with a posteriori error control.
//!
//! All iterations here run on the matrix handed to them; the verification
//! driver passes the negated generator, so `krylov_eval` approximates
//! e^{tA}v through ‖v‖·Basis·e^{−Ht}e₁. An adaptive driver grows the
//! subspace until the residual-based error bound certifies a target accuracy
//! over the whole horizon.

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};
use crate::model::{transpose, SparseMatrix};
use crate::sim;

/// Basis produced by an iteration: either the full orthonormal V (n×k) or a
/// caller-chosen projection P = proj·V (o'×k) accumulated on the fly, in
/// which case V itself was never stored.
#[derive(Clone, Debug)]
pub enum KrylovBasis {
    Full(DenseMatrix),
    Projected(DenseMatrix),
}

#[derive(Clone, Debug)]
enum HStorage {
    /// k×k upper Hessenberg.
    Hessenberg(DenseMatrix),
    /// Symmetric tridiagonal: diagonal and k−1 off-diagonal entries.
    Tridiagonal { diag: Vec<f64>, off: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct KrylovDecomposition {
    pub k: usize,
    h: HStorage,
    /// h_{k+1,k}: coupling of the discarded direction. Zero exactly when the
    /// iteration broke down (the Krylov space is invariant and the
    /// approximation is exact up to roundoff).
    pub residual_coupling: f64,
    pub exact_breakdown: bool,
    pub basis: KrylovBasis,
    /// Norm of the start vector; evaluation scales by it.
    pub v_norm: f64,
}

impl KrylovDecomposition {
    /// Materialize H as a dense k×k matrix.
    pub fn h_matrix(&self) -> DenseMatrix {
        match &self.h {
            HStorage::Hessenberg(m) => m.clone(),
            HStorage::Tridiagonal { diag, off } => {
                let k = diag.len();
                let mut m = DenseMatrix::zeros(k, k);
                for i in 0..k {
                    m.set(i, i, diag[i]);
                    if i + 1 < k {
                        m.set(i, i + 1, off[i]);
                        m.set(i + 1, i, off[i]);
                    }
                }
                m
            }
        }
    }

    pub fn is_tridiagonal(&self) -> bool {
        matches!(self.h, HStorage::Tridiagonal { .. })
    }

    fn basis_mul(&self, w: &[f64]) -> Vec<f64> {
        match &self.basis {
            KrylovBasis::Full(v) | KrylovBasis::Projected(v) => v.mat_vec(w),
        }
    }
}

/// Knobs for the adaptive driver.
#[derive(Clone, Debug)]
pub struct KrylovOptions {
    /// First checkpoint dimension.
    pub k_min: usize,
    /// Hard cap on the subspace dimension; defaults to n.
    pub k_max: Option<usize>,
    /// Relative tolerance for the |h(t)| quadrature inside the bound.
    pub quad_rel_tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { k_min: 4, k_max: None, quad_rel_tol: 1e-3 }
    }
}

/// Result of an adaptive run: the decomposition, the certified absolute
/// bound ‖true − approx‖ ≤ bound at the horizon (already scaled by ‖v‖),
/// the (k, bound) checkpoint trace, and an accounting of the peak
/// working-set words (f64 slots) the iteration held.
#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub decomposition: KrylovDecomposition,
    pub bound: f64,
    pub trace: Vec<(usize, f64)>,
    pub peak_aux_words: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_start_vector(a: &SparseMatrix, v: &[f64]) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "Krylov iteration needs a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    if v.len() != a.n_rows() {
        return Err(Error::Dimension(format!(
            "start vector has {} entries for an order-{} system",
            v.len(),
            a.n_rows()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("start vector has non-finite entries".into()));
    }
    let n = norm2(v);
    if n == 0.0 {
        return Err(Error::Invalid("start vector is zero".into()));
    }
    Ok(n)
}

/// Breakdown threshold: a next-vector norm at roundoff level relative to the
/// matrix scale is treated as exact invariance. The discarded coupling is
/// below machine noise for the given matrix, so the bound is reported as 0.
fn breakdown_tol(a: &SparseMatrix) -> f64 {
    1e-12 * (1.0 + a.norm_inf())
}

// ---------------------------------------------------------------------------
// Arnoldi
// ---------------------------------------------------------------------------

struct ArnoldiState<'a> {
    a: &'a SparseMatrix,
    vs: Vec<Vec<f64>>,
    /// Column j holds (h_{1,j+1}, …, h_{j+1,j+1}, h_{j+2,j+1}).
    h_cols: Vec<Vec<f64>>,
    v_norm: f64,
    breakdown: bool,
    tol: f64,
}

impl<'a> ArnoldiState<'a> {
    fn new(a: &'a SparseMatrix, v: &[f64]) -> Result<Self> {
        let v_norm = check_start_vector(a, v)?;
        let v0: Vec<f64> = v.iter().map(|x| x / v_norm).collect();
        Ok(ArnoldiState { a, vs: vec![v0], h_cols: vec![], v_norm, breakdown: false, tol: breakdown_tol(a) })
    }

    fn k(&self) -> usize {
        self.h_cols.len()
    }

    /// One modified-Gram-Schmidt extension step.
    fn step(&mut self) {
        debug_assert!(!self.breakdown);
        let j = self.h_cols.len();
        let mut w = vec![0.0; self.a.n_rows()];
        self.a.mul_vec_into(&self.vs[j], &mut w);
        let mut col = Vec::with_capacity(j + 2);
        for vi in &self.vs {
            let hij = dot(vi, &w);
            for (wx, vx) in w.iter_mut().zip(vi) {
                *wx -= hij * vx;
            }
            col.push(hij);
        }
        let hnext = norm2(&w);
        if hnext <= self.tol {
            col.push(0.0);
            self.h_cols.push(col);
            self.breakdown = true;
        } else {
            col.push(hnext);
            self.h_cols.push(col);
            for wx in w.iter_mut() {
                *wx /= hnext;
            }
            self.vs.push(w);
        }
    }

    fn h_dense(&self) -> DenseMatrix {
        let k = self.k();
        let mut h = DenseMatrix::zeros(k, k);
        for (j, col) in self.h_cols.iter().enumerate() {
            // col holds rows 0..=j+1 of column j; the j+1 entry is the
            // subdiagonal coupling, which belongs to H only while j+1 < k
            for (i, &v) in col.iter().enumerate() {
                if i < k {
                    h.set(i, j, v);
                }
            }
        }
        h
    }

    fn residual(&self) -> f64 {
        self.h_cols.last().map_or(0.0, |c| *c.last().unwrap())
    }

    fn finish(self) -> KrylovDecomposition {
        let k = self.k();
        let h = self.h_dense();
        let mut vmat = DenseMatrix::zeros(self.a.n_rows(), k);
        for (j, col) in self.vs.iter().take(k).enumerate() {
            for (i, &x) in col.iter().enumerate() {
                vmat.set(i, j, x);
            }
        }
        KrylovDecomposition {
            k,
            residual_coupling: if self.breakdown { 0.0 } else { self.residual() },
            exact_breakdown: self.breakdown,
            h: HStorage::Hessenberg(h),
            basis: KrylovBasis::Full(vmat),
            v_norm: self.v_norm,
        }
    }
}

/// Arnoldi iteration to a fixed dimension k (stops early on breakdown).
pub fn arnoldi_fixed(a: &SparseMatrix, v: &[f64], k: usize) -> Result<KrylovDecomposition> {
    if k == 0 || k > a.n_rows() {
        return Err(Error::Dimension(format!(
            "Krylov dimension {k} must be in 1..={}",
            a.n_rows()
        )));
    }
    let mut st = ArnoldiState::new(a, v)?;
    while st.k() < k && !st.breakdown {
        st.step();
    }
    Ok(st.finish())
}

// ---------------------------------------------------------------------------
// Lanczos
// ---------------------------------------------------------------------------

/// One two-term-recurrence step. Shared verbatim by the full and the
/// projected variants so their recurrence coefficients are bit-identical.
/// Writes A·v_cur − β_prev·v_prev − α·v_cur into `w` and returns (α, β).
fn lanczos_step_core(
    a: &SparseMatrix,
    v_prev: Option<&[f64]>,
    beta_prev: f64,
    v_cur: &[f64],
    w: &mut [f64],
) -> (f64, f64) {
    a.mul_vec_into(v_cur, w);
    if let Some(vp) = v_prev {
        for (wx, vx) in w.iter_mut().zip(vp) {
            *wx -= beta_prev * vx;
        }
    }
    let alpha = dot(w, v_cur);
    for (wx, vx) in w.iter_mut().zip(v_cur) {
        *wx -= alpha * vx;
    }
    let beta = norm2(w);
    (alpha, beta)
}

/// Full-storage Lanczos (stores every basis vector).
struct LanczosState<'a> {
    a: &'a SparseMatrix,
    vs: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    /// betas[j] is the coupling produced by step j+1; the last entry is the
    /// residual coupling, earlier ones are the off-diagonal of T.
    betas: Vec<f64>,
    v_norm: f64,
    breakdown: bool,
    tol: f64,
}

impl<'a> LanczosState<'a> {
    fn new(a: &'a SparseMatrix, v: &[f64]) -> Result<Self> {
        let v_norm = check_start_vector(a, v)?;
        let v0: Vec<f64> = v.iter().map(|x| x / v_norm).collect();
        Ok(LanczosState { a, vs: vec![v0], alphas: vec![], betas: vec![], v_norm, breakdown: false, tol: breakdown_tol(a) })
    }

    fn k(&self) -> usize {
        self.alphas.len()
    }

    fn step(&mut self) {
        debug_assert!(!self.breakdown);
        let j = self.alphas.len();
        let mut w = vec![0.0; self.a.n_rows()];
        let v_prev = if j > 0 { Some(self.vs[j - 1].as_slice()) } else { None };
        let beta_prev = if j > 0 { self.betas[j - 1] } else { 0.0 };
        let (alpha, beta) = lanczos_step_core(self.a, v_prev, beta_prev, &self.vs[j], &mut w);
        self.alphas.push(alpha);
        if beta <= self.tol {
            self.betas.push(0.0);
            self.breakdown = true;
        } else {
            self.betas.push(beta);
            for wx in w.iter_mut() {
                *wx /= beta;
            }
            self.vs.push(w);
        }
    }

    fn finish(self) -> KrylovDecomposition {
        let k = self.k();
        let mut vmat = DenseMatrix::zeros(self.a.n_rows(), k);
        for (j, col) in self.vs.iter().take(k).enumerate() {
            for (i, &x) in col.iter().enumerate() {
                vmat.set(i, j, x);
            }
        }
        KrylovDecomposition {
            k,
            residual_coupling: if self.breakdown { 0.0 } else { self.betas[k - 1] },
            exact_breakdown: self.breakdown,
            h: HStorage::Tridiagonal { diag: self.alphas, off: self.betas[..k.saturating_sub(1)].to_vec() },
            basis: KrylovBasis::Full(vmat),
            v_norm: self.v_norm,
        }
    }
}

/// Lanczos iteration to a fixed dimension k. The matrix must be symmetric;
/// this is the caller's responsibility (the verification driver gates on a
/// symmetry check) and is not re-verified here.
pub fn lanczos_fixed(a: &SparseMatrix, v: &[f64], k: usize) -> Result<KrylovDecomposition> {
    if k == 0 || k > a.n_rows() {
        return Err(Error::Dimension(format!(
            "Krylov dimension {k} must be in 1..={}",
            a.n_rows()
        )));
    }
    let mut st = LanczosState::new(a, v)?;
    while st.k() < k && !st.breakdown {
        st.step();
    }
    Ok(st.finish())
}

/// Memory-lean Lanczos: keeps a three-vector window of V plus the running
/// projection P = proj·V. Recurrence arithmetic is shared with the full
/// variant, so H and the adaptive termination dimension are identical.
struct ProjectedState<'a> {
    a: &'a SparseMatrix,
    proj: &'a DenseMatrix,
    v_prev: Option<Vec<f64>>,
    v_cur: Vec<f64>,
    p_cols: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    v_norm: f64,
    breakdown: bool,
    tol: f64,
}

impl<'a> ProjectedState<'a> {
    fn new(a: &'a SparseMatrix, v: &[f64], proj: &'a DenseMatrix) -> Result<Self> {
        let v_norm = check_start_vector(a, v)?;
        if proj.cols() != a.n_rows() {
            return Err(Error::Dimension(format!(
                "projection has {} columns for an order-{} system",
                proj.cols(),
                a.n_rows()
            )));
        }
        let v0: Vec<f64> = v.iter().map(|x| x / v_norm).collect();
        let p0 = proj.mat_vec(&v0);
        Ok(ProjectedState {
            a,
            proj,
            v_prev: None,
            v_cur: v0,
            p_cols: vec![p0],
            alphas: vec![],
            betas: vec![],
            v_norm,
            breakdown: false,
            tol: breakdown_tol(a),
        })
    }

    fn k(&self) -> usize {
        self.alphas.len()
    }

    fn step(&mut self) {
        debug_assert!(!self.breakdown);
        let j = self.alphas.len();
        let mut w = vec![0.0; self.a.n_rows()];
        let beta_prev = if j > 0 { self.betas[j - 1] } else { 0.0 };
        let (alpha, beta) =
            lanczos_step_core(self.a, self.v_prev.as_deref(), beta_prev, &self.v_cur, &mut w);
        self.alphas.push(alpha);
        if beta <= self.tol {
            self.betas.push(0.0);
            self.breakdown = true;
        } else {
            self.betas.push(beta);
            for wx in w.iter_mut() {
                *wx /= beta;
            }
            self.p_cols.push(self.proj.mat_vec(&w));
            self.v_prev = Some(std::mem::replace(&mut self.v_cur, w));
        }
    }

    fn finish(self) -> KrylovDecomposition {
        let k = self.k();
        let rows = self.proj.rows();
        let mut pmat = DenseMatrix::zeros(rows, k);
        for (j, col) in self.p_cols.iter().take(k).enumerate() {
            for (i, &x) in col.iter().enumerate() {
                pmat.set(i, j, x);
            }
        }
        KrylovDecomposition {
            k,
            residual_coupling: if self.breakdown { 0.0 } else { self.betas[k - 1] },
            exact_breakdown: self.breakdown,
            h: HStorage::Tridiagonal { diag: self.alphas, off: self.betas[..k.saturating_sub(1)].to_vec() },
            basis: KrylovBasis::Projected(pmat),
            v_norm: self.v_norm,
        }
    }
}

// ---------------------------------------------------------------------------
// Error bounds
// ---------------------------------------------------------------------------

/// Inputs of the residual error bound
///   bound = h_{k+1,k} · e^{−min(ν,0)·τ} · ∫₀^τ |h(t)| dt,
/// where h(t) is the (k,1) entry of e^{−tH} and ν lower-bounds the smallest
/// eigenvalue of the symmetric part of the iterated matrix.
#[derive(Clone, Debug)]
pub struct ErrorBoundInputs<'a> {
    pub h_matrix: &'a DenseMatrix,
    pub residual_coupling: f64,
    pub nu: f64,
    pub tau: f64,
    pub quad_rel_tol: f64,
}

/// Certified bound on ‖true − approx‖ at time τ for a unit start vector;
/// scale by ‖v‖ for general starts. Exact breakdown yields exactly 0.
pub fn aposteriori_error(inputs: &ErrorBoundInputs) -> Result<f64> {
    if inputs.tau < 0.0 {
        return Err(Error::Dimension("error bound needs tau >= 0".into()));
    }
    if inputs.residual_coupling == 0.0 {
        return Ok(0.0);
    }
    let integral = dense::integrate_abs_h(inputs.h_matrix, inputs.tau, inputs.quad_rel_tol)?;
    // inflate by the quadrature tolerance so the certified value still
    // dominates the formula evaluated with the exact integral
    Ok(inputs.residual_coupling
        * (-(inputs.nu.min(0.0)) * inputs.tau).exp()
        * integral
        * (1.0 + 2.0 * inputs.quad_rel_tol))
}

/// Same bound specialized to tridiagonal H with O(k) auxiliary storage: grid
/// values of e^{−tH}e₁ come from an adaptive Runge–Kutta sweep instead of a
/// dense step exponential.
fn tridiag_bound(diag: &[f64], off: &[f64], residual: f64, nu: f64, tau: f64, rel_tol: f64) -> Result<f64> {
    if residual == 0.0 {
        return Ok(0.0);
    }
    let integral = tridiag_integrate_abs_h(diag, off, tau, rel_tol)?;
    Ok(residual * (-(nu.min(0.0)) * tau).exp() * integral * (1.0 + 2.0 * rel_tol))
}

/// ∫₀^τ |h(t)| dt for symmetric tridiagonal H: composite Simpson with grid
/// doubling, node values from one Runge–Kutta sweep of w' = −Hw per level.
fn tridiag_integrate_abs_h(diag: &[f64], off: &[f64], tau: f64, rel_tol: f64) -> Result<f64> {
    let k = diag.len();
    assert_eq!(off.len() + 1, k);
    if tau < 0.0 {
        return Err(Error::Dimension("integrate needs tau >= 0".into()));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let deriv = |w: &[f64], out: &mut [f64]| {
        for i in 0..k {
            let mut acc = diag[i] * w[i];
            if i > 0 {
                acc += off[i - 1] * w[i - 1];
            }
            if i + 1 < k {
                acc += off[i] * w[i + 1];
            }
            out[i] = -acc;
        }
    };
    let mut e1 = vec![0.0; k];
    e1[0] = 1.0;
    let mut intervals = 64usize;
    let mut prev: Option<f64> = None;
    loop {
        let step = tau / intervals as f64;
        let mut acc = 0.0;
        sim::rk45_scan(&deriv, &e1, step, intervals, 1e-9, &mut |node, w| {
            let weight = if node == 0 || node == intervals {
                1.0
            } else if node % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += weight * w[k - 1].abs();
        })?;
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

/// log₁₀ of the classical truncation bound ‖v‖·‖At‖^k·e^{‖At‖}/k!, evaluated
/// in log space so astronomically large intermediate factorials never
/// overflow. Returns −∞ when the bound is exactly zero.
pub fn apriori_error(norm_at: f64, k: usize, v_norm: f64) -> f64 {
    debug_assert!(norm_at >= 0.0 && v_norm >= 0.0 && k >= 1);
    if norm_at == 0.0 || v_norm == 0.0 {
        return f64::NEG_INFINITY;
    }
    v_norm.log10() + (k as f64) * norm_at.log10() + norm_at * std::f64::consts::LOG10_E
        - ln_factorial(k) / std::f64::consts::LN_10
}

/// ln k!: exact summation for small k, Stirling series beyond. The two
/// branches agree to ~1e−13 relative at the switchover.
fn ln_factorial(k: usize) -> f64 {
    if k <= 1024 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        let z = (k + 1) as f64;
        (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * z)
            - 1.0 / (360.0 * z.powi(3))
            + 1.0 / (1260.0 * z.powi(5))
            - 1.0 / (1680.0 * z.powi(7))
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// ‖v‖ · Basis · e^{−Ht} e₁. With the decomposition built on the negated
/// generator −A, this approximates e^{tA}v (projected, for projected bases).
pub fn krylov_eval(dec: &KrylovDecomposition, t: f64) -> Result<Vec<f64>> {
    let h = dec.h_matrix();
    let e = dense::expm(&h.scaled(-t))?;
    let w = e.column(0);
    Ok(dec.basis_mul(&w).iter().map(|x| x * dec.v_norm).collect())
}

/// Evaluations at t = 0, step, …, count·step via repeated application of one
/// step exponential (k² per node instead of a fresh expm each).
pub fn eval_grid(dec: &KrylovDecomposition, step: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    let h = dec.h_matrix();
    let prop = dense::expm(&h.scaled(-step))?;
    let mut w = vec![0.0; dec.k];
    w[0] = 1.0;
    let mut out = Vec::with_capacity(count + 1);
    for _ in 0..=count {
        out.push(dec.basis_mul(&w).iter().map(|x| x * dec.v_norm).collect());
        w = prop.mat_vec(&w);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Adaptive driver
// ---------------------------------------------------------------------------

trait Engine {
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn broke_down(&self) -> bool;
    fn v_norm(&self) -> f64;
    fn advance(&mut self);
    fn bound(&self, tau: f64, nu: f64, quad_rel_tol: f64) -> Result<f64>;
    /// Live f64 words held by the iteration's own storage.
    fn live_words(&self) -> usize;
    /// Transient words the bound evaluation needs at dimension k.
    fn scratch_words(&self) -> usize;
    fn into_decomposition(self) -> KrylovDecomposition;
}

impl Engine for ArnoldiState<'_> {
    fn n(&self) -> usize {
        self.a.n_rows()
    }
    fn k(&self) -> usize {
        self.k()
    }
    fn broke_down(&self) -> bool {
        self.breakdown
    }
    fn v_norm(&self) -> f64 {
        self.v_norm
    }
    fn advance(&mut self) {
        self.step();
    }
    fn bound(&self, tau: f64, nu: f64, quad_rel_tol: f64) -> Result<f64> {
        let residual = if self.breakdown { 0.0 } else { self.residual() };
        if residual == 0.0 {
            return Ok(0.0);
        }
        let h = self.h_dense();
        let integral = dense::integrate_abs_h(&h, tau, quad_rel_tol)?;
        Ok(residual * (-(nu.min(0.0)) * tau).exp() * integral)
    }
    fn live_words(&self) -> usize {
        self.vs.len() * self.n() + self.h_cols.iter().map(|c| c.len()).sum::<usize>()
    }
    fn scratch_words(&self) -> usize {
        // dense H materialization plus the expm working set
        8 * self.k() * self.k() + 4 * self.k()
    }
    fn into_decomposition(self) -> KrylovDecomposition {
        self.finish()
    }
}

impl Engine for LanczosState<'_> {
    fn n(&self) -> usize {
        self.a.n_rows()
    }
    fn k(&self) -> usize {
        self.k()
    }
    fn broke_down(&self) -> bool {
        self.breakdown
    }
    fn v_norm(&self) -> f64 {
        self.v_norm
    }
    fn advance(&mut self) {
        self.step();
    }
    fn bound(&self, tau: f64, nu: f64, quad_rel_tol: f64) -> Result<f64> {
        let k = self.k();
        let residual = if self.breakdown { 0.0 } else { self.betas[k - 1] };
        tridiag_bound(&self.alphas, &self.betas[..k - 1], residual, nu, tau, quad_rel_tol)
    }
    fn live_words(&self) -> usize {
        self.vs.len() * self.n() + 2 * self.k()
    }
    fn scratch_words(&self) -> usize {
        12 * self.k()
    }
    fn into_decomposition(self) -> KrylovDecomposition {
        self.finish()
    }
}

impl Engine for ProjectedState<'_> {
    fn n(&self) -> usize {
        self.a.n_rows()
    }
    fn k(&self) -> usize {
        self.k()
    }
    fn broke_down(&self) -> bool {
        self.breakdown
    }
    fn v_norm(&self) -> f64 {
        self.v_norm
    }
    fn advance(&mut self) {
        self.step();
    }
    fn bound(&self, tau: f64, nu: f64, quad_rel_tol: f64) -> Result<f64> {
        let k = self.k();
        let residual = if self.breakdown { 0.0 } else { self.betas[k - 1] };
        tridiag_bound(&self.alphas, &self.betas[..k - 1], residual, nu, tau, quad_rel_tol)
    }
    fn live_words(&self) -> usize {
        let window = (2 + self.v_prev.is_some() as usize) * self.n();
        window + 2 * self.k() + self.p_cols.iter().map(|c| c.len()).sum::<usize>()
    }
    fn scratch_words(&self) -> usize {
        12 * self.k()
    }
    fn into_decomposition(self) -> KrylovDecomposition {
        self.finish()
    }
}

/// Grow the subspace through checkpoints k, ceil(1.1k), … continuing the same
/// iteration, until the a posteriori bound certifies ε over [0, τ]. Errors
/// once the next checkpoint would exceed the cap, reporting the best bound.
fn drive_adaptive<E: Engine>(
    mut engine: E,
    tau: f64,
    epsilon: f64,
    nu: f64,
    opts: &KrylovOptions,
) -> Result<AdaptiveRun> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Dimension(format!("horizon must be nonnegative, got {tau}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Invalid(format!("error target must be positive, got {epsilon}")));
    }
    let k_cap = opts.k_max.unwrap_or(engine.n()).min(engine.n()).max(1);
    let mut target = opts.k_min.clamp(1, k_cap);
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut peak = 0usize;
    let mut best = f64::INFINITY;
    loop {
        while engine.k() < target && !engine.broke_down() {
            engine.advance();
        }
        // scale by ‖v‖ so the certified bound is absolute for the caller's
        // actual start vector, not the normalized one
        let bound = engine.bound(tau, nu, opts.quad_rel_tol)? * engine.v_norm();
        peak = peak.max(engine.live_words() + engine.scratch_words());
        trace.push((engine.k(), bound));
        best = best.min(bound);
        if bound <= epsilon {
            return Ok(AdaptiveRun {
                decomposition: engine.into_decomposition(),
                bound,
                trace,
                peak_aux_words: peak,
            });
        }
        let next = ((target as f64) * 1.1).ceil() as usize;
        let next = next.max(target + 1);
        if next > k_cap {
            return Err(Error::Numerical(format!(
                "error bound did not reach {epsilon:e} within the dimension cap {k_cap}; best bound {best:e} at k = {}",
                engine.k()
            )));
        }
        target = next;
    }
}

/// Adaptive Arnoldi with error control over the horizon τ.
pub fn arnoldi_adaptive(
    a: &SparseMatrix,
    v: &[f64],
    tau: f64,
    epsilon: f64,
    nu: f64,
    opts: &KrylovOptions,
) -> Result<AdaptiveRun> {
    drive_adaptive(ArnoldiState::new(a, v)?, tau, epsilon, nu, opts)
}

/// Adaptive full-storage Lanczos (symmetric matrices).
pub fn lanczos_adaptive(
    a: &SparseMatrix,
    v: &[f64],
    tau: f64,
    epsilon: f64,
    nu: f64,
    opts: &KrylovOptions,
) -> Result<AdaptiveRun> {
    drive_adaptive(LanczosState::new(a, v)?, tau, epsilon, nu, opts)
}

/// Adaptive projected Lanczos: identical H and termination dimension to
/// `lanczos_adaptive` on the same inputs, but only proj·V is accumulated.
/// Passing proj = I reproduces the full basis.
pub fn lanczos_projected_adaptive(
    a: &SparseMatrix,
    v: &[f64],
    proj: &DenseMatrix,
    tau: f64,
    epsilon: f64,
    nu: f64,
    opts: &KrylovOptions,
) -> Result<AdaptiveRun> {
    drive_adaptive(ProjectedState::new(a, v, proj)?, tau, epsilon, nu, opts)
}

// ---------------------------------------------------------------------------
// Spectral estimate
// ---------------------------------------------------------------------------

/// Lower estimate of ν = λ_min((A+Aᵀ)/2), computed matrix-free by a Lanczos
/// sweep on the symmetric part with the smallest Ritz value extracted by
/// Sturm bisection. Iterates until the Ritz residual drops below `tol` and
/// returns θ − residual − tol; θ never undershoots λ_min (interlacing), and
/// the subtraction absorbs the residual gap once the pair has converged.
pub fn estimate_nu(a: &SparseMatrix, tol: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("spectral estimate needs a square matrix".into()));
    }
    let n = a.n_rows();
    if n == 0 {
        return Err(Error::Invalid("spectral estimate needs a nonempty matrix".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let at = transpose(a);
    let mut buf1 = vec![0.0; n];
    let mut buf2 = vec![0.0; n];
    let mut sym_mul = move |x: &[f64], out: &mut [f64]| {
        a.mul_vec_into(x, &mut buf1);
        at.mul_vec_into(x, &mut buf2);
        for i in 0..n {
            out[i] = 0.5 * (buf1[i] + buf2[i]);
        }
    };

    // deterministic dense start vector (avoids accidental orthogonality to
    // the extremal eigenvector for structured matrices)
    let mut seed = 0x9E3779B97F4A7C15u64;
    let mut v_cur: Vec<f64> = (0..n)
        .map(|_| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    let nv = norm2(&v_cur).max(1e-300);
    for x in v_cur.iter_mut() {
        *x /= nv;
    }

    let scale = a.norm_inf().max(1.0);
    let cap = 10 * (n as f64).sqrt() as usize + 1000;
    let mut v_prev: Option<Vec<f64>> = None;
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    for step in 1..=cap.min(n) {
        sym_mul(&v_cur, &mut w);
        if let Some(vp) = &v_prev {
            let b = betas[step - 2];
            for (wx, vx) in w.iter_mut().zip(vp) {
                *wx -= b * vx;
            }
        }
        let alpha = dot(&w, &v_cur);
        for (wx, vx) in w.iter_mut().zip(&v_cur) {
            *wx -= alpha * vx;
        }
        let beta = norm2(&w);
        alphas.push(alpha);

        if beta <= 1e-12 * scale {
            // invariant subspace: the Ritz value is exact to roundoff
            let (theta, _) = smallest_ritz(&alphas, &betas);
            return Ok(theta - tol);
        }

        let at_checkpoint = step >= 2 && (step % 5 == 0 || step == cap.min(n));
        if at_checkpoint {
            let (theta, s_last) = smallest_ritz(&alphas, &betas);
            let residual = beta * s_last;
            if residual <= tol {
                return Ok(theta - residual - tol);
            }
        }

        betas.push(beta);
        let mut v_next = std::mem::replace(&mut w, vec![0.0; n]);
        for x in v_next.iter_mut() {
            *x /= beta;
        }
        v_prev = Some(std::mem::replace(&mut v_cur, v_next));
    }
    // ran out of dimensions: the tridiagonalization is complete, so the
    // smallest Ritz value is the answer up to roundoff
    let (theta, _) = smallest_ritz(&alphas, &betas);
    Ok(theta - tol)
}

/// Smallest eigenvalue of the symmetric tridiagonal (diag, off) by Sturm
/// bisection, plus |last component| of its unit eigenvector via inverse
/// iteration (needed for the Lanczos residual estimate).
fn smallest_ritz(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let k = diag.len();
    let off = &off[..k.saturating_sub(1)];
    if k == 1 {
        return (diag[0], 1.0);
    }
    // Gershgorin bracket
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i < k - 1 {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let span = (hi - lo).max(1e-300);
    let count_below = |x: f64| -> usize {
        let mut cnt = 0usize;
        let mut d = diag[0] - x;
        if d < 0.0 {
            cnt += 1;
        }
        for i in 1..k {
            let denom = if d == 0.0 { 1e-300 } else { d };
            d = diag[i] - x - off[i - 1] * off[i - 1] / denom;
            if d < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let mut a = lo - 1e-12 * span;
    let mut b = hi + 1e-12 * span;
    for _ in 0..120 {
        if b - a <= 1e-14 * span {
            break;
        }
        let mid = 0.5 * (a + b);
        if count_below(mid) >= 1 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let theta = 0.5 * (a + b);
    let s_last = eigvec_last_component(diag, off, theta, span);
    (theta, s_last)
}

/// |e_kᵀ s| for the unit eigenvector s of the shifted tridiagonal, via two
/// rounds of inverse iteration with a pivoted banded solve.
fn eigvec_last_component(diag: &[f64], off: &[f64], theta: f64, span: f64) -> f64 {
    let k = diag.len();
    let mut y = vec![1.0 / (k as f64).sqrt(); k];
    for _ in 0..2 {
        tridiag_shifted_solve(diag, off, theta, span, &mut y);
        let norm = norm2(&y).max(1e-300);
        for x in y.iter_mut() {
            *x /= norm;
        }
    }
    y[k - 1].abs()
}

/// Solve (T − θI) x = rhs in place by Gaussian elimination with partial
/// pivoting on the three bands (one fill-in diagonal appears). Near-singular
/// pivots are perturbed at roundoff scale, which is exactly what inverse
/// iteration wants.
fn tridiag_shifted_solve(diag: &[f64], off: &[f64], theta: f64, span: f64, rhs: &mut [f64]) {
    let k = diag.len();
    let mut d: Vec<f64> = diag.iter().map(|v| v - theta).collect();
    let mut u1: Vec<f64> = off.to_vec(); // superdiagonal
    let mut u2 = vec![0.0; k.saturating_sub(2)]; // fill-in
    let mut sub: Vec<f64> = off.to_vec(); // subdiagonal
    let eps = 1e-300 + 1e-16 * span;
    for i in 0..k - 1 {
        if sub[i].abs() > d[i].abs() {
            // swap rows i and i+1; row i spans columns (i, i+1, i+2) as
            // (d, u1, u2), row i+1 spans them as (sub, d, u1)
            std::mem::swap(&mut sub[i], &mut d[i]);
            std::mem::swap(&mut u1[i], &mut d[i + 1]);
            if i + 2 < k {
                u2[i] = u1[i + 1];
                u1[i + 1] = 0.0;
            }
            rhs.swap(i, i + 1);
        }
        if d[i].abs() < eps {
            d[i] = if d[i] < 0.0 { -eps } else { eps };
        }
        let f = sub[i] / d[i];
        d[i + 1] -= f * u1[i];
        if i + 2 < k {
            u1[i + 1] -= f * u2[i];
        }
        rhs[i + 1] -= f * rhs[i];
        sub[i] = 0.0;
    }
    if d[k - 1].abs() < eps {
        d[k - 1] = if d[k - 1] < 0.0 { -eps } else { eps };
    }
    // back substitution
    rhs[k - 1] /= d[k - 1];
    if k >= 2 {
        rhs[k - 2] = (rhs[k - 2] - u1[k - 2] * rhs[k - 1]) / d[k - 2];
    }
    for i in (0..k.saturating_sub(2)).rev() {
        let mut v = rhs[i] - u1[i] * rhs[i + 1];
        v -= u2[i] * rhs[i + 2];
        rhs[i] = v / d[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spmv;

    fn sparse(rows: &[Vec<f64>]) -> SparseMatrix {
        SparseMatrix::from_dense(rows).unwrap()
    }

    fn oscillator() -> SparseMatrix {
        sparse(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ])
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    fn random_sparse(rng: &mut Lcg, n: usize, density: f64, symmetric: bool) -> SparseMatrix {
        let mut triplets = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if symmetric && c < r {
                    continue;
                }
                if (rng.next() + 1.0) / 2.0 < density || r == c {
                    let v = rng.next();
                    triplets.push((r, c, v));
                    if symmetric && r != c {
                        triplets.push((c, r, v));
                    }
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &triplets).unwrap()
    }

    #[test]
    fn eigenvector_start_breaks_down_immediately() {
        let a = sparse(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let dec = arnoldi_fixed(&a, &[1.0, 0.0], 2).unwrap();
        assert_eq!(dec.k, 1);
        assert!(dec.exact_breakdown);
        assert_eq!(dec.residual_coupling, 0.0);
        let h = dec.h_matrix();
        assert_eq!((h.rows(), h.cols()), (1, 1));
        assert!((h.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arnoldi_relation_and_orthonormality() {
        let mut rng = Lcg(7);
        for trial in 0..8 {
            let n = 12 + 6 * trial;
            let a = random_sparse(&mut rng, n, 0.3, false);
            let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
            let k = 6 + trial;
            let dec = arnoldi_fixed(&a, &v, k).unwrap();
            assert_eq!(dec.k, k, "no breakdown expected on random data");
            let KrylovBasis::Full(vmat) = &dec.basis else { panic!("full basis expected") };
            let h = dec.h_matrix();
            // relation: A·V = V·H + rc·v_{k+1}·e_kᵀ columnwise
            let mut vnext = {
                // reconstruct v_{k+1} from the relation on the last column
                let vk = vmat.column(k - 1);
                let av = spmv(&a, &vk).unwrap();
                let mut r = av;
                for j in 0..k {
                    let vj = vmat.column(j);
                    for (x, y) in r.iter_mut().zip(&vj) {
                        *x -= h.get(j, k - 1) * y;
                    }
                }
                r
            };
            let rn = norm2(&vnext);
            assert!((rn - dec.residual_coupling).abs() <= 1e-8 * (1.0 + a.norm_1()));
            for x in vnext.iter_mut() {
                *x /= rn.max(1e-300);
            }
            let mut worst = 0.0f64;
            for c in 0..k {
                let vc = vmat.column(c);
                let av = spmv(&a, &vc).unwrap();
                for r in 0..n {
                    let mut lhs = av[r];
                    for j in 0..k {
                        lhs -= vmat.get(r, j) * h.get(j, c);
                    }
                    if c == k - 1 {
                        lhs -= dec.residual_coupling * vnext[r];
                    }
                    worst = worst.max(lhs.abs());
                }
            }
            assert!(worst <= 1e-8 * (1.0 + a.norm_1()), "relation residual {worst}");
            // orthonormality
            let mut ortho = 0.0f64;
            for p in 0..k {
                for q in 0..k {
                    let g = dot(&vmat.column(p), &vmat.column(q)) - if p == q { 1.0 } else { 0.0 };
                    ortho = ortho.max(g.abs());
                }
            }
            assert!(ortho <= 1e-8, "orthonormality defect {ortho}");
        }
    }

    #[test]
    fn lanczos_matches_arnoldi_on_symmetric() {
        let mut rng = Lcg(11);
        let n = 30;
        let a = random_sparse(&mut rng, n, 0.2, true);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let k = 10;
        let da = arnoldi_fixed(&a, &v, k).unwrap();
        let dl = lanczos_fixed(&a, &v, k).unwrap();
        assert!(dl.is_tridiagonal());
        let (ha, hl) = (da.h_matrix(), dl.h_matrix());
        for r in 0..k {
            for c in 0..k {
                assert!(
                    (ha.get(r, c) - hl.get(r, c)).abs() <= 1e-8 * (1.0 + a.norm_1()),
                    "H mismatch at ({r},{c})"
                );
            }
        }
        assert!((da.residual_coupling - dl.residual_coupling).abs() <= 1e-8 * (1.0 + a.norm_1()));
    }

    #[test]
    fn scale_invariance_of_start_vector() {
        let mut rng = Lcg(23);
        let n = 20;
        let a = random_sparse(&mut rng, n, 0.3, false);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        // power-of-two scale: exact in every entry and in the norm, so the
        // normalized start vector — and everything downstream — is identical
        let scaled: Vec<f64> = v.iter().map(|x| 1024.0 * x).collect();
        let d1 = arnoldi_fixed(&a, &v, 8).unwrap();
        let d2 = arnoldi_fixed(&a, &scaled, 8).unwrap();
        assert_eq!(d1.h_matrix(), d2.h_matrix(), "H must be bit-identical");
        let (KrylovBasis::Full(v1), KrylovBasis::Full(v2)) = (&d1.basis, &d2.basis) else {
            panic!()
        };
        assert_eq!(v1, v2, "V must be bit-identical");
        assert_eq!(d2.v_norm, 1024.0 * d1.v_norm);

        // generic scales agree to rounding
        let odd: Vec<f64> = v.iter().map(|x| 1000.0 * x).collect();
        let d3 = arnoldi_fixed(&a, &odd, 8).unwrap();
        let (h1, h3) = (d1.h_matrix(), d3.h_matrix());
        for r in 0..8 {
            for c in 0..8 {
                assert!((h1.get(r, c) - h3.get(r, c)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_start_vector_rejected() {
        let a = sparse(&[vec![1.0]]);
        assert!(arnoldi_fixed(&a, &[0.0], 1).is_err());
    }

    #[test]
    fn eval_reproduces_oscillator_flow() {
        // basis on the negated generator approximates e^{tA}v
        let a = oscillator();
        let b = a.negated();
        let dec = arnoldi_fixed(&b, &[1.0, 0.0, 0.0, 0.0], 4).unwrap();
        let t = 3.0 * std::f64::consts::FRAC_PI_4;
        let y = krylov_eval(&dec, t).unwrap();
        let expected = [t.cos(), -t.sin(), 0.0, 0.0];
        for (g, w) in y.iter().zip(&expected) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
        assert!((y[0] + 0.7071).abs() < 1e-4);
        assert!((y[1] + 0.7071).abs() < 1e-4);
    }

    #[test]
    fn full_dimension_eval_matches_expm() {
        let mut rng = Lcg(31);
        let n = 9;
        let a = random_sparse(&mut rng, n, 0.5, false);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let dec = arnoldi_fixed(&a.negated(), &v, n).unwrap();
        let t = 1.3;
        let got = krylov_eval(&dec, t).unwrap();
        let want = dense::expm(&a.to_dense().scaled(t)).unwrap().mat_vec(&v);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-10 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }

    #[test]
    fn eval_grid_matches_pointwise_eval() {
        let mut rng = Lcg(37);
        let n = 14;
        let a = random_sparse(&mut rng, n, 0.4, false);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let dec = arnoldi_fixed(&a, &v, 7).unwrap();
        let grid = eval_grid(&dec, 0.25, 6).unwrap();
        for (j, row) in grid.iter().enumerate() {
            let single = krylov_eval(&dec, 0.25 * j as f64).unwrap();
            for (g, w) in row.iter().zip(&single) {
                assert!((g - w).abs() <= 1e-11 * (1.0 + w.abs()));
            }
        }
    }

    #[test]
    fn apriori_error_examples() {
        let five = apriori_error(1.0, 5, 1.0);
        assert!((five - (-1.644886764144373)).abs() < 1e-12);
        assert_eq!(apriori_error(0.0, 3, 1.0), f64::NEG_INFINITY);
        // decreasing in k once k exceeds ‖At‖
        let mut prev = apriori_error(3.0, 4, 1.0);
        for k in 5..40 {
            let cur = apriori_error(3.0, k, 1.0);
            assert!(cur < prev, "bound must decrease with k");
            prev = cur;
        }
        // the log-space evaluation survives astronomically large inputs
        let big = apriori_error(32771611.0, 1_000_000, 1.0);
        assert!((big - 16182318.69432269).abs() < 1e-4, "{big}");
    }

    #[test]
    fn ln_factorial_branches_agree() {
        let exact: f64 = (2..=1024).map(|i| (i as f64).ln()).sum();
        let z = 1025.0f64;
        let stirling = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + 1.0 / (12.0 * z)
            - 1.0 / (360.0 * z.powi(3))
            + 1.0 / (1260.0 * z.powi(5))
            - 1.0 / (1680.0 * z.powi(7));
        assert!((exact - stirling).abs() / exact < 1e-12);
        let _ = ln_factorial(1024);
        let _ = ln_factorial(1025);
    }

    #[test]
    fn aposteriori_zero_on_breakdown() {
        let a = sparse(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let dec = arnoldi_fixed(&a, &[1.0, 0.0], 2).unwrap();
        let h = dec.h_matrix();
        let bound = aposteriori_error(&ErrorBoundInputs {
            h_matrix: &h,
            residual_coupling: dec.residual_coupling,
            nu: 0.0,
            tau: 5.0,
            quad_rel_tol: 1e-3,
        })
        .unwrap();
        assert_eq!(bound, 0.0);
    }

    #[test]
    fn aposteriori_bound_is_sound_on_samples() {
        // ‖e^{τA}v − eval(τ)‖ ≤ ‖v‖·bound on a few seeded systems; the broad
        // sweep lives in the integration suite
        let mut rng = Lcg(101);
        for trial in 0..6 {
            let n = 16 + 4 * trial;
            let a = random_sparse(&mut rng, n, 0.25, false);
            let b = a.negated();
            let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
            let tau = 0.5 + 0.4 * trial as f64;
            let k = 8;
            let dec = arnoldi_fixed(&b, &v, k).unwrap();
            let nu = estimate_nu(&b, 1e-6).unwrap();
            let h = dec.h_matrix();
            let bound = dec.v_norm
                * aposteriori_error(&ErrorBoundInputs {
                    h_matrix: &h,
                    residual_coupling: dec.residual_coupling,
                    nu,
                    tau,
                    quad_rel_tol: 1e-3,
                })
                .unwrap();
            let approx = krylov_eval(&dec, tau).unwrap();
            let truth = dense::expm(&a.to_dense().scaled(tau)).unwrap().mat_vec(&v);
            let err = norm2(&truth.iter().zip(&approx).map(|(x, y)| x - y).collect::<Vec<_>>());
            assert!(
                err <= bound * (1.0 + 1e-9) + 1e-14,
                "trial {trial}: error {err} exceeds bound {bound}"
            );
        }
    }

    #[test]
    fn tridiag_quadrature_matches_dense() {
        let diag = vec![0.8, 1.1, 0.5, 0.9, 1.3, 0.7];
        let off = vec![0.4, 0.3, 0.6, 0.2, 0.5];
        let k = diag.len();
        let mut h = DenseMatrix::zeros(k, k);
        for i in 0..k {
            h.set(i, i, diag[i]);
            if i + 1 < k {
                h.set(i, i + 1, off[i]);
                h.set(i + 1, i, off[i]);
            }
        }
        let tau = 3.0;
        let lean = tridiag_integrate_abs_h(&diag, &off, tau, 1e-5).unwrap();
        let full = dense::integrate_abs_h(&h, tau, 1e-5).unwrap();
        assert!((lean - full).abs() <= 2e-3 * full, "{lean} vs {full}");
    }

    #[test]
    fn adaptive_breaks_down_to_exact_bound_on_oscillator() {
        let a = oscillator().negated();
        let run = arnoldi_adaptive(&a, &[0.0, 1.0, 0.0, 0.0], std::f64::consts::PI, 1e-6, 0.0, &KrylovOptions::default())
            .unwrap();
        assert!(run.decomposition.exact_breakdown);
        assert_eq!(run.bound, 0.0);
        assert!(run.decomposition.k <= 4);
    }

    #[test]
    fn adaptive_is_deterministic() {
        let mut rng = Lcg(55);
        let n = 40;
        let a = random_sparse(&mut rng, n, 0.15, true);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let r1 = lanczos_adaptive(&a, &v, 2.0, 1e-8, 0.0, &KrylovOptions::default()).unwrap();
        let r2 = lanczos_adaptive(&a, &v, 2.0, 1e-8, 0.0, &KrylovOptions::default()).unwrap();
        assert_eq!(r1.trace, r2.trace, "checkpoint traces must be identical across reruns");
        assert_eq!(r1.decomposition.h_matrix(), r2.decomposition.h_matrix());
    }

    #[test]
    fn adaptive_cap_reports_best_bound() {
        let mut rng = Lcg(77);
        let n = 50;
        let a = random_sparse(&mut rng, n, 0.3, false);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let err = arnoldi_adaptive(
            &a,
            &v,
            8.0,
            1e-300,
            -5.0,
            &KrylovOptions { k_min: 2, k_max: Some(6), quad_rel_tol: 1e-3 },
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cap 6") && msg.contains("best bound"), "{msg}");
    }

    #[test]
    fn projected_equivalence_with_identity() {
        let mut rng = Lcg(91);
        let n = 36;
        let a = random_sparse(&mut rng, n, 0.2, true);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let eye = DenseMatrix::identity(n);
        let full = lanczos_adaptive(&a, &v, 1.5, 1e-9, 0.0, &KrylovOptions::default()).unwrap();
        let proj = lanczos_projected_adaptive(&a, &v, &eye, 1.5, 1e-9, 0.0, &KrylovOptions::default()).unwrap();
        assert_eq!(full.decomposition.k, proj.decomposition.k, "termination dimension must match");
        assert_eq!(full.decomposition.h_matrix(), proj.decomposition.h_matrix(), "H must be bit-identical");
        assert_eq!(full.trace, proj.trace);
        let (KrylovBasis::Full(vf), KrylovBasis::Projected(vp)) = (&full.decomposition.basis, &proj.decomposition.basis)
        else {
            panic!()
        };
        assert_eq!(vf, vp, "P with proj = I equals V bitwise");
    }

    #[test]
    fn projected_matches_projection_of_full_basis() {
        let mut rng = Lcg(93);
        let n = 28;
        let a = random_sparse(&mut rng, n, 0.25, true);
        let v: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let mut proj = DenseMatrix::zeros(2, n);
        for c in 0..n {
            proj.set(0, c, rng.next());
            proj.set(1, c, rng.next());
        }
        let full = lanczos_adaptive(&a, &v, 2.0, 1e-9, 0.0, &KrylovOptions::default()).unwrap();
        let lean = lanczos_projected_adaptive(&a, &v, &proj, 2.0, 1e-9, 0.0, &KrylovOptions::default()).unwrap();
        let KrylovBasis::Full(vf) = &full.decomposition.basis else { panic!() };
        let KrylovBasis::Projected(p) = &lean.decomposition.basis else { panic!() };
        let expected = proj.matmul(vf);
        for r in 0..2 {
            for c in 0..full.decomposition.k {
                assert!((expected.get(r, c) - p.get(r, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nu_estimate_examples() {
        let d = sparse(&[vec![-1.0, 0.0, 0.0], vec![0.0, -2.0, 0.0], vec![0.0, 0.0, -3.0]]);
        let nu = estimate_nu(&d, 1e-6).unwrap();
        assert!(nu <= -3.0 + 1e-9, "estimate must not exceed the true minimum");
        assert!(nu >= -3.0 - 3e-6, "estimate too slack: {nu}");

        // skew-symmetric matrices have zero symmetric part
        let skew = sparse(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let nu = estimate_nu(&skew, 1e-6).unwrap();
        assert!(nu.abs() <= 3e-6, "{nu}");
    }

    #[test]
    fn nu_estimate_on_random_symmetric_matches_dense_extreme() {
        let mut rng = Lcg(203);
        for trial in 0..5 {
            let n = 20 + 8 * trial;
            let a = random_sparse(&mut rng, n, 0.3, true);
            let nu = estimate_nu(&a, 1e-8).unwrap();
            // oracle: smallest eigenvalue via many-step bisection on the
            // dense symmetric matrix's characteristic sign count is overkill;
            // instead verify the variational bound xᵀAx ≥ ν‖x‖² on samples
            for _ in 0..40 {
                let x: Vec<f64> = (0..n).map(|_| rng.next()).collect();
                let ax = spmv(&a, &x).unwrap();
                let quad = dot(&x, &ax) / dot(&x, &x);
                assert!(quad >= nu - 1e-7 * (1.0 + quad.abs()), "Rayleigh {quad} below estimate {nu}");
            }
        }
    }

    #[test]
    fn smallest_ritz_on_known_tridiagonal() {
        // second-difference matrix: eigenvalues 2 − 2cos(jπ/(k+1))
        let k = 12;
        let diag = vec![2.0; k];
        let off = vec![-1.0; k - 1];
        let (theta, s_last) = smallest_ritz(&diag, &off);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (k as f64 + 1.0)).cos();
        assert!((theta - exact).abs() < 1e-10, "{theta} vs {exact}");
        // eigenvector components are sin(ij π/(k+1)); last-over-norm known
        let denom: f64 = (1..=k)
            .map(|i| (i as f64 * std::f64::consts::PI / (k as f64 + 1.0)).sin().powi(2))
            .sum::<f64>()
            .sqrt();
        let expected = ((k as f64) * std::f64::consts::PI / (k as f64 + 1.0)).sin().abs() / denom;
        assert!((s_last - expected).abs() < 1e-8, "{s_last} vs {expected}");
    }
}
