//! Built-in benchmark generators.
//!
//! Every generator is deterministic: the same parameters produce the same
//! problem, bit for bit.

use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{
    load_constraints, load_matrix_market, ConstraintKind, LinearConstraintSet, SparseMatrix,
    VerificationProblem,
};

/// Harmonic oscillator driven against a constant offset: states (position,
/// velocity, clock, one). The initial position is −5, the initial velocity
/// z₁ ranges over [0,1], and the run is unsafe if the position ever equals
/// `unsafe_level` at a step. With δ = π/4 and T = π the flow is exactly
/// periodic on the grid, so every expected value has a closed form.
pub fn gen_oscillator(unsafe_level: f64) -> VerificationProblem {
    let a = SparseMatrix::from_dense(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![-1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 0.0, 0.0],
    ])
    .unwrap();
    let e = DenseMatrix::from_rows(&[
        vec![0.0, -5.0],
        vec![1.0, 0.0],
        vec![0.0, 0.0],
        vec![0.0, 1.0],
    ])
    .unwrap();
    let init = LinearConstraintSet::from_intervals(&[(0.0, 1.0), (1.0, 1.0)]).unwrap();
    let c = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
    let unsafe_set = LinearConstraintSet::new(
        DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
        vec![ConstraintKind::Eq],
        vec![unsafe_level],
    )
    .unwrap();
    VerificationProblem::new(
        a,
        e,
        init,
        c,
        Some(unsafe_set),
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::PI,
    )
    .unwrap()
}

/// Heat conduction on the unit cube, discretized on an m×m×m cell-centered
/// grid (node coordinates (i+0.5)·h, h = 1/m, index ix + m·iy + m²·iz).
/// Five faces are insulated; the x = 1 face exchanges heat with a zero-
/// temperature ambient at rate `exchange_coeff`. A corner region starts hot
/// (one shared initial variable ranging over `temp_range`); everything else
/// starts at zero. The output is the temperature at the center node.
#[derive(Clone, Debug)]
pub struct HeatParams {
    /// Nodes per axis; the system has m³ states.
    pub m: usize,
    pub diffusivity: f64,
    pub exchange_coeff: f64,
    /// Upper corner of the heated region [0,x]×[0,y]×[0,z].
    pub heated_region: [f64; 3],
    pub temp_range: (f64, f64),
    pub step: f64,
    pub time_bound: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams {
            m: 5,
            diffusivity: 0.01,
            exchange_coeff: 0.5,
            heated_region: [0.4, 0.2, 0.1],
            temp_range: (0.9, 1.1),
            step: 0.02,
            time_bound: 20.0,
        }
    }
}

/// Node indices whose (i+0.5)h coordinates lie inside the heated corner.
fn heated_nodes(p: &HeatParams) -> Vec<usize> {
    let m = p.m;
    let h = 1.0 / m as f64;
    let inside = |idx: usize, limit: f64| (idx as f64 + 0.5) * h <= limit;
    let mut nodes = Vec::new();
    for iz in 0..m {
        if !inside(iz, p.heated_region[2]) {
            continue;
        }
        for iy in 0..m {
            if !inside(iy, p.heated_region[1]) {
                continue;
            }
            for ix in 0..m {
                if inside(ix, p.heated_region[0]) {
                    nodes.push(ix + m * iy + m * m * iz);
                }
            }
        }
    }
    nodes
}

pub fn gen_heat3d(p: &HeatParams) -> Result<VerificationProblem> {
    if p.m < 2 {
        return Err(Error::Invalid("heat grid needs at least 2 nodes per axis".into()));
    }
    if p.diffusivity <= 0.0 {
        return Err(Error::Invalid("diffusivity must be positive".into()));
    }
    if p.exchange_coeff < 0.0 {
        return Err(Error::Invalid("exchange coefficient must be nonnegative".into()));
    }
    let m = p.m;
    let n = m * m * m;
    let h = 1.0 / m as f64;
    let a_scale = p.diffusivity / (h * h);
    // Robin face x = 1: ghost elimination leaves a purely diagonal extra
    // term, which keeps the matrix exactly symmetric
    let ch = p.exchange_coeff * h;
    let robin_extra = a_scale * ch / (1.0 + ch / 2.0);

    let idx = |ix: usize, iy: usize, iz: usize| ix + m * iy + m * m * iz;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(7 * n);
    for iz in 0..m {
        for iy in 0..m {
            for ix in 0..m {
                let me = idx(ix, iy, iz);
                let mut diag = 0.0;
                let mut neighbor = |other: usize| {
                    triplets.push((me, other, a_scale));
                };
                // each existing neighbor contributes +a off-diagonal and −a
                // on the diagonal; insulated faces mirror back (no term)
                if ix > 0 {
                    neighbor(idx(ix - 1, iy, iz));
                    diag -= a_scale;
                }
                if ix + 1 < m {
                    neighbor(idx(ix + 1, iy, iz));
                    diag -= a_scale;
                }
                if iy > 0 {
                    neighbor(idx(ix, iy - 1, iz));
                    diag -= a_scale;
                }
                if iy + 1 < m {
                    neighbor(idx(ix, iy + 1, iz));
                    diag -= a_scale;
                }
                if iz > 0 {
                    neighbor(idx(ix, iy, iz - 1));
                    diag -= a_scale;
                }
                if iz + 1 < m {
                    neighbor(idx(ix, iy, iz + 1));
                    diag -= a_scale;
                }
                if ix == m - 1 {
                    diag -= robin_extra;
                }
                if diag != 0.0 {
                    triplets.push((me, me, diag));
                }
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &triplets)?;

    let heated = heated_nodes(p);
    let mut e = DenseMatrix::zeros(n, 1);
    for &node in &heated {
        e.set(node, 0, 1.0);
    }
    let init = LinearConstraintSet::from_intervals(&[p.temp_range])?;

    let center = {
        let c = (m - 1) / 2;
        idx(c, c, c)
    };
    let mut c_mat = DenseMatrix::zeros(1, n);
    c_mat.set(0, center, 1.0);

    VerificationProblem::new(a, e, init, c_mat, None, p.step, p.time_bound)
}

/// Base model for the replicated-helicopter benchmark, read from a data
/// directory containing `a.mtx`, `init_space.mtx`, and
/// `init_constraints.json`.
#[derive(Clone, Debug)]
pub struct HelicopterBase {
    pub a: SparseMatrix,
    pub init_space: DenseMatrix,
    pub init_constraints: LinearConstraintSet,
    /// State index whose copy-average forms the output.
    pub output_index: usize,
}

pub fn load_helicopter_base(dir: impl AsRef<Path>, output_index: usize) -> Result<HelicopterBase> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingData(format!(
            "helicopter base directory {} not found",
            dir.display()
        )));
    }
    let a = load_matrix_market(dir.join("a.mtx"))?;
    let init_space = load_matrix_market(dir.join("init_space.mtx"))?.to_dense();
    let init_constraints = load_constraints(dir.join("init_constraints.json"))?;
    if output_index >= a.n_rows() {
        return Err(Error::Invalid(format!(
            "output index {output_index} out of range for a base model with {} states",
            a.n_rows()
        )));
    }
    Ok(HelicopterBase { a, init_space, init_constraints, output_index })
}

/// Replicate the base model `copies` times along the block diagonal. All
/// copies share the initial variables (the init space is stacked), so every
/// copy flies the same trajectory and the averaged output equals the base
/// output — which makes the verdict invariant in the number of copies while
/// the state dimension scales freely. Unsafe when the average reaches 0.45.
pub fn gen_helicopter(base: &HelicopterBase, copies: usize) -> Result<VerificationProblem> {
    if copies == 0 {
        return Err(Error::Invalid("need at least one copy".into()));
    }
    if !base.a.is_square() {
        return Err(Error::Dimension("base matrix must be square".into()));
    }
    let nb = base.a.n_rows();
    if base.init_space.rows() != nb {
        return Err(Error::Dimension(format!(
            "base init space has {} rows for a base model with {nb} states",
            base.init_space.rows()
        )));
    }
    let i = base.init_space.cols();
    let n = nb * copies;

    let mut triplets = Vec::with_capacity(base.a.nnz() * copies);
    for copy in 0..copies {
        let shift = copy * nb;
        for r in 0..nb {
            let (cols, vals) = base.a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((shift + r, shift + c, v));
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &triplets)?;

    let mut e = DenseMatrix::zeros(n, i);
    for copy in 0..copies {
        let shift = copy * nb;
        for r in 0..nb {
            for c in 0..i {
                e.set(shift + r, c, base.init_space.get(r, c));
            }
        }
    }

    let mut c_mat = DenseMatrix::zeros(1, n);
    let weight = 1.0 / copies as f64;
    for copy in 0..copies {
        c_mat.set(0, copy * nb + base.output_index, weight);
    }

    let unsafe_set = LinearConstraintSet::new(
        DenseMatrix::from_rows(&[vec![-1.0]])?,
        vec![ConstraintKind::Le],
        vec![-0.45],
    )?;

    VerificationProblem::new(
        a,
        e,
        base.init_constraints.clone(),
        c_mat,
        Some(unsafe_set),
        0.1,
        30.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{is_symmetric, spmv};
    use crate::verifier::{self, Status, Strategy, VerifyOptions};

    #[test]
    fn oscillator_matches_closed_form() {
        let p = gen_oscillator(4.0);
        assert_eq!(p.n(), 4);
        assert_eq!(p.n_steps(), 4);
        let verdict = verifier::verify(&p, &VerifyOptions::default()).unwrap();
        assert_eq!(verdict.status, Status::Unsafe);
        assert_eq!(verdict.step_index, Some(3));
    }

    #[test]
    fn heat_m2_matrix_by_hand() {
        // 8 corner nodes, a = 0.01/0.25 = 0.04; every node touches three
        // neighbors, x=1 nodes get the Robin extra 0.04·0.25/1.125
        let p = HeatParams { m: 2, ..HeatParams::default() };
        let problem = gen_heat3d(&p).unwrap();
        let a = &problem.a_matrix;
        assert_eq!(a.n_rows(), 8);
        let extra: f64 = 0.04 * 0.25 / 1.125;
        assert!((extra - 0.0088888888888888889).abs() < 1e-15);
        for iz in 0..2 {
            for iy in 0..2 {
                for ix in 0..2 {
                    let me = ix + 2 * iy + 4 * iz;
                    let want_diag = if ix == 1 { -0.12 - extra } else { -0.12 };
                    assert!((a.get(me, me) - want_diag).abs() < 1e-15, "node {me}");
                    let flip_x = (1 - ix) + 2 * iy + 4 * iz;
                    let flip_y = ix + 2 * (1 - iy) + 4 * iz;
                    let flip_z = ix + 2 * iy + 4 * (1 - iz);
                    for other in [flip_x, flip_y, flip_z] {
                        assert!((a.get(me, other) - 0.04).abs() < 1e-15);
                    }
                    // no diagonal-corner coupling
                    let diag_xy = (1 - ix) + 2 * (1 - iy) + 4 * iz;
                    assert_eq!(a.get(me, diag_xy), 0.0);
                }
            }
        }
        // heated corner region excludes every node at m = 2
        assert!(heated_nodes(&p).is_empty());
    }

    #[test]
    fn heat_matrix_is_symmetric_and_dissipative() {
        for m in [2, 3, 5, 7] {
            let p = HeatParams { m, ..HeatParams::default() };
            let problem = gen_heat3d(&p).unwrap();
            assert!(is_symmetric(&problem.a_matrix, 0.0).unwrap(), "m = {m}");
            // row sums: 0 on insulated rows, −robin_extra on the x=1 face
            let ones = vec![1.0; problem.n()];
            let sums = spmv(&problem.a_matrix, &ones).unwrap();
            let h = 1.0 / m as f64;
            let a_scale = 0.01 / (h * h);
            let ch = 0.5 * h;
            let extra = a_scale * ch / (1.0 + ch / 2.0);
            for (node, s) in sums.iter().enumerate() {
                let ix = node % m;
                let want = if ix == m - 1 { -extra } else { 0.0 };
                assert!((s - want).abs() < 1e-12 * a_scale, "m {m} node {node}: {s}");
            }
        }
    }

    #[test]
    fn heat_zero_exchange_conserves_mass() {
        let p = HeatParams { m: 4, exchange_coeff: 0.0, ..HeatParams::default() };
        let problem = gen_heat3d(&p).unwrap();
        let a_scale = 0.01 * 16.0;
        let ones = vec![1.0; 64];
        for s in spmv(&problem.a_matrix, &ones).unwrap() {
            assert!(s.abs() <= 1e-15 * a_scale, "insulated row sums to {s}, not ~0");
        }
    }

    #[test]
    fn heat_heated_region_counts() {
        for (m, want) in [(2, 0), (5, 2), (10, 8), (25, 150)] {
            let p = HeatParams { m, ..HeatParams::default() };
            assert_eq!(heated_nodes(&p).len(), want, "m = {m}");
        }
        // m = 5: nodes (0,0,0) and (1,0,0)
        let p = HeatParams { m: 5, ..HeatParams::default() };
        assert_eq!(heated_nodes(&p), vec![0, 1]);
    }

    #[test]
    fn heat_problem_shape() {
        let p = HeatParams::default();
        let problem = gen_heat3d(&p).unwrap();
        assert_eq!(problem.n(), 125);
        assert_eq!(problem.init_dim(), 1);
        assert_eq!(problem.output_dim(), 1);
        assert_eq!(problem.n_steps(), 1000);
        // center node of a 5-grid is (2,2,2)
        assert_eq!(problem.output_matrix.get(0, 62), 1.0);
        // E is the heated-region indicator
        assert_eq!(problem.init_space.get(0, 0), 1.0);
        assert_eq!(problem.init_space.get(1, 0), 1.0);
        assert_eq!(problem.init_space.get(2, 0), 0.0);
    }

    #[test]
    fn helicopter_blocks_share_trajectories() {
        // synthetic 2-state base: decaying spiral, output index 0
        let base = HelicopterBase {
            a: SparseMatrix::from_dense(&[vec![-0.1, 1.0], vec![-1.0, -0.1]]).unwrap(),
            init_space: DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
            init_constraints: LinearConstraintSet::from_intervals(&[(0.4, 0.5)]).unwrap(),
            output_index: 0,
        };
        let single = gen_helicopter(&base, 1).unwrap();
        let triple = gen_helicopter(&base, 3).unwrap();
        assert_eq!(triple.n(), 6);
        assert_eq!(triple.init_dim(), 1);
        // block diagonal: no cross-copy coupling
        assert_eq!(triple.a_matrix.get(0, 2), 0.0);
        assert_eq!(triple.a_matrix.get(3, 2), -1.0);
        // averaged output weights
        assert!((triple.output_matrix.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((triple.output_matrix.get(0, 2) - 1.0 / 3.0).abs() < 1e-15);
        // the verdict is invariant in the number of copies
        let opts = VerifyOptions { strategy: Some(Strategy::DenseExpm), ..VerifyOptions::default() };
        let v1 = verifier::verify(&single, &opts).unwrap();
        let v3 = verifier::verify(&triple, &opts).unwrap();
        assert_eq!(v1.status, v3.status);
        assert_eq!(v1.step_index, v3.step_index);
    }

    #[test]
    fn helicopter_base_dir_missing() {
        let err = load_helicopter_base("/nonexistent/heli", 7).unwrap_err();
        assert!(matches!(err, Error::MissingData(_)));
    }

    #[test]
    fn generators_are_deterministic() {
        let p1 = gen_heat3d(&HeatParams::default()).unwrap();
        let p2 = gen_heat3d(&HeatParams::default()).unwrap();
        assert_eq!(p1.a_matrix.to_dense(), p2.a_matrix.to_dense());
        assert_eq!(p1.init_space, p2.init_space);
        assert_eq!(p1.output_matrix, p2.output_matrix);
    }
}
