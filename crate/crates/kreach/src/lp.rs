//! Small dense linear programs over (output, initial) variables and the
//! embedded revised-simplex solver used to answer them.
//!
//! The step LPs are tiny (tens of rows) but are solved thousands of times, so
//! the solver keeps an explicit basis inverse updated per pivot and accepts a
//! warm-start basis from the previous step.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{ConstraintKind, LinearConstraintSet, VerificationProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// LP over free variables (y₁..y_o, z₁..z_i) with mixed ≤ / = rows.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub n_outputs: usize,
    pub n_initial: usize,
    /// Rows over the concatenated (y, z) vector.
    pub rows: LinearConstraintSet,
    pub objective: Option<(Vec<f64>, Sense)>,
}

impl LinearProgram {
    pub fn new(
        n_outputs: usize,
        n_initial: usize,
        rows: LinearConstraintSet,
        objective: Option<(Vec<f64>, Sense)>,
    ) -> Result<Self> {
        if rows.width() != n_outputs + n_initial {
            return Err(Error::Dimension(format!(
                "LP rows have width {} but there are {} outputs + {} initial variables",
                rows.width(),
                n_outputs,
                n_initial
            )));
        }
        if let Some((c, _)) = &objective {
            if c.len() != n_outputs + n_initial {
                return Err(Error::Dimension(format!(
                    "objective has {} coefficients for {} variables",
                    c.len(),
                    n_outputs + n_initial
                )));
            }
        }
        Ok(LinearProgram { n_outputs, n_initial, rows, objective })
    }

    pub fn n_vars(&self) -> usize {
        self.n_outputs + self.n_initial
    }

    pub fn variable_names(&self) -> Vec<String> {
        (1..=self.n_outputs)
            .map(|j| format!("y{j}"))
            .chain((1..=self.n_initial).map(|j| format!("z{j}")))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Feasible,
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// (y, z) values for Feasible/Optimal outcomes.
    pub assignment: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
}

/// Basis of a previous solve, reusable as the starting basis for the next
/// step's LP of identical shape.
#[derive(Clone, Debug)]
pub struct WarmStart {
    basis: Vec<usize>,
    ncols_core: usize,
    m: usize,
}

/// Couple a per-step basis matrix B_j (o×i) with the initial and unsafe sets:
///   y − B_j z = 0          (one equality per output)
///   init rows over z
///   unsafe rows over y
pub fn build_step_lp(
    basis_entry: &DenseMatrix,
    init: &LinearConstraintSet,
    unsafe_set: &LinearConstraintSet,
) -> Result<LinearProgram> {
    let o = basis_entry.rows();
    let i = basis_entry.cols();
    if init.width() != i {
        return Err(Error::Dimension(format!(
            "init constraints have width {} but the basis matrix has {i} columns",
            init.width()
        )));
    }
    if unsafe_set.width() != o {
        return Err(Error::Dimension(format!(
            "unsafe constraints have width {} but the basis matrix has {o} rows",
            unsafe_set.width()
        )));
    }
    let w = o + i;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(o + init.len() + unsafe_set.len());
    let mut kinds = Vec::with_capacity(rows.capacity());
    let mut rhs = Vec::with_capacity(rows.capacity());
    for r in 0..o {
        let mut row = vec![0.0; w];
        row[r] = 1.0;
        for c in 0..i {
            row[o + c] = -basis_entry.get(r, c);
        }
        rows.push(row);
        kinds.push(ConstraintKind::Eq);
        rhs.push(0.0);
    }
    for r in 0..init.len() {
        let mut row = vec![0.0; w];
        row[o..].copy_from_slice(init.coeff_row(r));
        rows.push(row);
        kinds.push(init.kind(r));
        rhs.push(init.rhs(r));
    }
    for r in 0..unsafe_set.len() {
        let mut row = vec![0.0; w];
        row[..o].copy_from_slice(unsafe_set.coeff_row(r));
        rows.push(row);
        kinds.push(unsafe_set.kind(r));
        rhs.push(unsafe_set.rhs(r));
    }
    LinearProgram::new(o, i, LinearConstraintSet::new(DenseMatrix::from_rows(&rows)?, kinds, rhs)?, None)
}

pub fn solve_feasibility(lp: &LinearProgram) -> Result<LpOutcome> {
    Ok(solve_with_warm_start(lp, false, None)?.0)
}

pub fn solve_optimize(lp: &LinearProgram) -> Result<LpOutcome> {
    if lp.objective.is_none() {
        return Err(Error::Invalid("optimize called on an LP without an objective".into()));
    }
    Ok(solve_with_warm_start(lp, true, None)?.0)
}

/// Feasibility check used when ingesting problems: the initial set must be
/// nonempty and bounded in every z variable.
pub fn check_initial_set(problem: &VerificationProblem) -> Result<()> {
    let i = problem.init_dim();
    let lp = LinearProgram::new(0, i, problem.init_constraints.clone(), None)?;
    let outcome = solve_feasibility(&lp)?;
    if outcome.status == LpStatus::Infeasible {
        return Err(Error::Invalid("initial set is infeasible".into()));
    }
    for j in 0..i {
        let mut c = vec![0.0; i];
        c[j] = 1.0;
        for sense in [Sense::Maximize, Sense::Minimize] {
            let lp = LinearProgram::new(0, i, problem.init_constraints.clone(), Some((c.clone(), sense)))?;
            if solve_optimize(&lp)?.status == LpStatus::Unbounded {
                return Err(Error::Invalid(format!("initial set is unbounded in z{}", j + 1)));
            }
        }
    }
    Ok(())
}

const TOL_REDUCED: f64 = 1e-9;
const TOL_RATIO: f64 = 1e-9;
const TOL_ZERO: f64 = 1e-11;
const TOL_PHASE1: f64 = 1e-8;
/// Post-solve check: returned assignments must satisfy every row this tightly.
pub const FEASIBILITY_TOL: f64 = 1e-6;
const REFACTOR_EVERY: usize = 64;

/// Solve; `optimize` selects whether phase 2 runs on `lp.objective`.
/// Returns the outcome plus the final basis for warm-starting a successor.
pub fn solve_with_warm_start(
    lp: &LinearProgram,
    optimize: bool,
    warm: Option<&WarmStart>,
) -> Result<(LpOutcome, WarmStart)> {
    if optimize && lp.objective.is_none() {
        return Err(Error::Invalid("optimize called on an LP without an objective".into()));
    }
    let mut tab = Tableau::build(lp)?;

    let warm_ok = match warm {
        Some(w)
            if w.m == tab.m && w.ncols_core == tab.ncols_core =>
        {
            tab.try_warm(&w.basis)
        }
        _ => false,
    };

    if !warm_ok {
        tab.cold_phase1()?;
        let phase1_obj = tab.phase1_objective();
        if phase1_obj > TOL_PHASE1 * (1.0 + tab.b_scale) {
            #[cfg(debug_assertions)]
            tab.check_farkas_certificate();
            let warm_out = tab.warm_start();
            return Ok((
                LpOutcome { status: LpStatus::Infeasible, assignment: None, objective_value: None },
                warm_out,
            ));
        }
        tab.drive_out_artificials()?;
    }

    let status = if optimize {
        let (coeffs, sense) = lp.objective.as_ref().unwrap();
        let mut costs = vec![0.0; tab.ntotal];
        for (j, &c) in coeffs.iter().enumerate() {
            let signed = match sense {
                Sense::Minimize => c,
                Sense::Maximize => -c,
            };
            costs[2 * j] = signed;
            costs[2 * j + 1] = -signed;
        }
        match tab.run(&costs, true)? {
            PhaseEnd::Optimal => LpStatus::Optimal,
            PhaseEnd::Unbounded => LpStatus::Unbounded,
        }
    } else {
        LpStatus::Feasible
    };

    let warm_out = tab.warm_start();
    if status == LpStatus::Unbounded {
        return Ok((LpOutcome { status, assignment: None, objective_value: None }, warm_out));
    }

    let x = tab.extract_solution(lp);
    if lp.rows.max_violation(&x) > FEASIBILITY_TOL {
        return Err(Error::Numerical(format!(
            "simplex returned an assignment violating the rows by {:e}",
            lp.rows.max_violation(&x)
        )));
    }
    let objective_value = lp
        .objective
        .as_ref()
        .filter(|_| optimize)
        .map(|(c, _)| c.iter().zip(&x).map(|(a, b)| a * b).sum());
    Ok((LpOutcome { status, assignment: Some(x), objective_value }, warm_out))
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

/// Standard-form tableau: free variables split into +/− parts, a slack per ≤
/// row, one artificial per row, and b normalized nonnegative.
struct Tableau {
    m: usize,
    ncols_core: usize,
    ntotal: usize,
    a: DenseMatrix, // m × ntotal, column j of the standard form in a[.][j]
    b: Vec<f64>,
    b_scale: f64,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DenseMatrix,
    pivots_since_refactor: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Tableau> {
        let m = lp.rows.len();
        let d = lp.n_vars();
        let n_slack = (0..m).filter(|&r| lp.rows.kind(r) == ConstraintKind::Le).count();
        let ncols_core = 2 * d + n_slack;
        let ntotal = ncols_core + m;
        let mut a = DenseMatrix::zeros(m, ntotal);
        let mut b = vec![0.0; m];
        let mut slack = 2 * d;
        for r in 0..m {
            let coeffs = lp.rows.coeff_row(r);
            let flip = if lp.rows.rhs(r) < 0.0 { -1.0 } else { 1.0 };
            for (j, &c) in coeffs.iter().enumerate() {
                a.set(r, 2 * j, flip * c);
                a.set(r, 2 * j + 1, -flip * c);
            }
            if lp.rows.kind(r) == ConstraintKind::Le {
                a.set(r, slack, flip);
                slack += 1;
            }
            a.set(r, ncols_core + r, 1.0);
            b[r] = flip * lp.rows.rhs(r);
        }
        let b_scale = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        Ok(Tableau {
            m,
            ncols_core,
            ntotal,
            a,
            b,
            b_scale,
            basis: (0..m).map(|r| ncols_core + r).collect(),
            in_basis: vec![false; ntotal],
            binv: DenseMatrix::identity(m),
            pivots_since_refactor: 0,
        })
    }

    /// Try to adopt a previous basis. Succeeds when the columns form an
    /// invertible matrix whose basic solution is (numerically) nonnegative.
    fn try_warm(&mut self, basis: &[usize]) -> bool {
        if basis.len() != self.m {
            return false;
        }
        let saved = self.basis.clone();
        self.basis = basis.to_vec();
        if self.refactor().is_err() {
            self.basis = saved;
            self.binv = DenseMatrix::identity(self.m);
            return false;
        }
        let x = self.x_basic();
        let tol = 1e-9 * (1.0 + self.b_scale);
        if x.iter().all(|&v| v >= -tol) {
            self.in_basis = vec![false; self.ntotal];
            for &j in &self.basis {
                self.in_basis[j] = true;
            }
            // a warm basis may carry an artificial pinned at zero from a
            // degenerate predecessor; only accept it if it stays at zero
            let artificial_positive = self
                .basis
                .iter()
                .zip(&x)
                .any(|(&j, &v)| j >= self.ncols_core && v > tol);
            if !artificial_positive {
                return true;
            }
        }
        self.basis = saved;
        self.binv = DenseMatrix::identity(self.m);
        false
    }

    fn cold_phase1(&mut self) -> Result<()> {
        self.basis = (0..self.m).map(|r| self.ncols_core + r).collect();
        self.in_basis = vec![false; self.ntotal];
        for &j in &self.basis {
            self.in_basis[j] = true;
        }
        self.binv = DenseMatrix::identity(self.m);
        self.pivots_since_refactor = 0;
        let mut costs = vec![0.0; self.ntotal];
        for j in self.ncols_core..self.ntotal {
            costs[j] = 1.0;
        }
        match self.run(&costs, false)? {
            PhaseEnd::Optimal => Ok(()),
            // the phase-1 objective is bounded below by zero, so an
            // unbounded ray here is numerical breakdown
            PhaseEnd::Unbounded => Err(Error::Numerical("phase-1 simplex reported an unbounded ray".into())),
        }
    }

    fn phase1_objective(&self) -> f64 {
        let x = self.x_basic();
        self.basis
            .iter()
            .zip(&x)
            .filter(|(&j, _)| j >= self.ncols_core)
            .map(|(_, &v)| v.max(0.0))
            .sum()
    }

    /// Pivot zero-valued artificials out of the basis where a structural or
    /// slack column can replace them; rows with no such column are redundant
    /// and keep their artificial pinned at zero.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for row in 0..self.m {
            if self.basis[row] < self.ncols_core {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.ncols_core {
                if self.in_basis[j] {
                    continue;
                }
                let col = self.column(j);
                let d_r: f64 = (0..self.m).map(|c| self.binv.get(row, c) * col[c]).sum();
                if d_r.abs() > 1e-7 && best.map_or(true, |(_, b)| d_r.abs() > b) {
                    best = Some((j, d_r.abs()));
                }
            }
            if let Some((j, _)) = best {
                let d = self.binv_times_column(j);
                self.pivot(j, row, &d)?;
            }
        }
        Ok(())
    }

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.m).map(|r| self.a.get(r, j)).collect()
    }

    fn binv_times_column(&self, j: usize) -> Vec<f64> {
        let col = self.column(j);
        (0..self.m)
            .map(|r| (0..self.m).map(|c| self.binv.get(r, c) * col[c]).sum())
            .collect()
    }

    fn x_basic(&self) -> Vec<f64> {
        (0..self.m)
            .map(|r| (0..self.m).map(|c| self.binv.get(r, c) * self.b[c]).sum())
            .collect()
    }

    fn refactor(&mut self) -> Result<()> {
        let mut bmat = DenseMatrix::zeros(self.m, self.m);
        for (pos, &j) in self.basis.iter().enumerate() {
            for r in 0..self.m {
                bmat.set(r, pos, self.a.get(r, j));
            }
        }
        self.binv = bmat.solve(&DenseMatrix::identity(self.m))?;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, entering: usize, leaving_row: usize, d: &[f64]) -> Result<()> {
        let piv = d[leaving_row];
        if piv.abs() <= TOL_ZERO {
            return Err(Error::Numerical("simplex pivot element is numerically zero".into()));
        }
        self.in_basis[self.basis[leaving_row]] = false;
        self.basis[leaving_row] = entering;
        self.in_basis[entering] = true;
        for c in 0..self.m {
            let v = self.binv.get(leaving_row, c) / piv;
            self.binv.set(leaving_row, c, v);
        }
        for r in 0..self.m {
            if r == leaving_row {
                continue;
            }
            let f = d[r];
            if f == 0.0 {
                continue;
            }
            for c in 0..self.m {
                let v = self.binv.get(r, c) - f * self.binv.get(leaving_row, c);
                self.binv.set(r, c, v);
            }
        }
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// One simplex phase: Dantzig entering rule with lowest-index ties,
    /// switching to Bland's rule after 10·m consecutive degenerate pivots.
    fn run(&mut self, costs: &[f64], bar_artificials: bool) -> Result<PhaseEnd> {
        let pivot_cap = 2000 + 200 * self.m;
        let mut pivots = 0usize;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if pivots > pivot_cap {
                return Err(Error::Numerical(format!(
                    "simplex exceeded {pivot_cap} pivots; presumed cycling"
                )));
            }
            let x = self.x_basic();
            // y = c_B^T B^{-1}
            let y: Vec<f64> = (0..self.m)
                .map(|c| (0..self.m).map(|r| costs[self.basis[r]] * self.binv.get(r, c)).sum())
                .collect();
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.ntotal {
                if self.in_basis[j] || (bar_artificials && j >= self.ncols_core) {
                    continue;
                }
                let aj = self.column(j);
                let rc = costs[j] - y.iter().zip(&aj).map(|(p, q)| p * q).sum::<f64>();
                if rc < -TOL_REDUCED {
                    if bland {
                        entering = Some((j, rc));
                        break;
                    }
                    if entering.map_or(true, |(_, best)| rc < best) {
                        entering = Some((j, rc));
                    }
                }
            }
            let Some((e, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let d = self.binv_times_column(e);

            // leaving row: minimum ratio over d_r > 0, but rows holding a
            // zero-valued artificial leave first so artificials never grow
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if self.basis[r] >= self.ncols_core && d[r].abs() > TOL_RATIO && x[r] <= TOL_ZERO * (1.0 + self.b_scale) {
                    leaving = Some((r, 0.0));
                    break;
                }
            }
            if leaving.is_none() {
                for r in 0..self.m {
                    if d[r] > TOL_RATIO {
                        let ratio = x[r].max(0.0) / d[r];
                        let better = match leaving {
                            None => true,
                            Some((lr, lv)) => {
                                ratio < lv - TOL_ZERO
                                    || (ratio <= lv + TOL_ZERO && self.basis[r] < self.basis[lr])
                            }
                        };
                        if better {
                            leaving = Some((r, ratio));
                        }
                    }
                }
            }
            let Some((l, step)) = leaving else {
                return Ok(PhaseEnd::Unbounded);
            };
            if step <= TOL_ZERO {
                degenerate_run += 1;
                if degenerate_run > 10 * self.m.max(1) {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(e, l, &d)?;
            pivots += 1;
        }
    }

    fn extract_solution(&self, lp: &LinearProgram) -> Vec<f64> {
        let xb = self.x_basic();
        let mut std_x = vec![0.0; self.ntotal];
        for (r, &j) in self.basis.iter().enumerate() {
            std_x[j] = xb[r].max(0.0);
        }
        (0..lp.n_vars()).map(|j| std_x[2 * j] - std_x[2 * j + 1]).collect()
    }

    fn warm_start(&self) -> WarmStart {
        WarmStart { basis: self.basis.clone(), ncols_core: self.ncols_core, m: self.m }
    }

    /// Debug-mode certificate: when phase 1 ends positive, its duals y form a
    /// Farkas ray with yᵀb > 0 and yᵀa_j ≤ 0 for every real column.
    #[cfg(debug_assertions)]
    fn check_farkas_certificate(&self) {
        let mut costs = vec![0.0; self.ntotal];
        for j in self.ncols_core..self.ntotal {
            costs[j] = 1.0;
        }
        let y: Vec<f64> = (0..self.m)
            .map(|c| (0..self.m).map(|r| costs[self.basis[r]] * self.binv.get(r, c)).sum())
            .collect();
        let yb: f64 = y.iter().zip(&self.b).map(|(p, q)| p * q).sum();
        assert!(
            yb > 0.0,
            "Farkas certificate failed: y.b = {yb:e} is not positive"
        );
        for j in 0..self.ncols_core {
            let aj = self.column(j);
            let ya: f64 = y.iter().zip(&aj).map(|(p, q)| p * q).sum();
            let scale: f64 = 1.0 + aj.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(
                ya <= 1e-8 * scale,
                "Farkas certificate failed: y.a_{j} = {ya:e} exceeds tolerance"
            );
        }
    }
}
