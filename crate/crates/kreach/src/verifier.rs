//! Step-by-step safety verification.
//!
//! The verifier never materializes reachable sets. It computes the projected
//! basis matrices B_j = C·e^{Aδj}·E for j = 0..s by simulating one trajectory
//! per start column, then decides each step with a feasibility LP coupling
//! the initial polytope (over z) with the unsafe polytope (over y = B_j z).
//! A feasible step yields a concrete witness that is re-validated with an
//! independent integrator before the UNSAFE verdict is returned.

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};
use crate::krylov::{self, KrylovOptions};
use crate::lp::{self, LpStatus, Sense, WarmStart};
use crate::model::{is_symmetric, transpose, LinearConstraintSet, SparseMatrix, VerificationProblem};
use crate::sim;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// Dense step exponential, propagated across the grid. For systems small
    /// enough that an n×n dense matrix is comfortable.
    #[serde(rename = "dense")]
    DenseExpm,
    /// Adaptive Runge–Kutta integration of each start column.
    #[serde(rename = "rk45")]
    Rk45,
    /// Arnoldi iteration with a posteriori error control (general matrices).
    #[serde(rename = "arnoldi")]
    KrylovArnoldi,
    /// Lanczos iteration with a posteriori error control (symmetric
    /// matrices) storing only the projected basis.
    #[serde(rename = "lanczos")]
    KrylovLanczos,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Strategy::DenseExpm => "dense",
            Strategy::Rk45 => "rk45",
            Strategy::KrylovArnoldi => "arnoldi",
            Strategy::KrylovLanczos => "lanczos",
        };
        f.write_str(s)
    }
}

/// Which operator the trajectories run on. Simulating the transpose from the
/// output directions is cheaper whenever there are fewer outputs than start
/// columns, and yields the same basis matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimDirection {
    Forward,
    Transpose,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// None selects automatically: dense below `dense_cap`, otherwise
    /// Lanczos for symmetric matrices and Arnoldi for the rest.
    pub strategy: Option<Strategy>,
    /// None picks Transpose exactly when outputs < start columns.
    pub direction: Option<SimDirection>,
    /// Absolute error target for Krylov trajectory approximations.
    pub epsilon: f64,
    /// Auto-selection threshold for the dense strategy.
    pub dense_cap: usize,
    /// Local error tolerance of the Runge–Kutta strategy.
    pub rk45_tol: f64,
    /// Counter-example re-validation threshold (relative).
    pub validation_tol: f64,
    pub krylov: KrylovOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            strategy: None,
            direction: None,
            epsilon: 1e-8,
            dense_cap: 500,
            rk45_tol: 1e-10,
            validation_tol: 1e-6,
            krylov: KrylovOptions::default(),
        }
    }
}

/// The projected basis matrices B_j = C·e^{Aδj}·E for j = 0..=s, with
/// provenance: how they were computed and, for Krylov strategies, the
/// certified accuracy, the subspace dimensions, the adaptive traces, and the
/// peak working-set words observed across all column runs.
#[derive(Clone, Debug)]
pub struct BasisSequence {
    pub entries: Vec<DenseMatrix>,
    pub strategy: Strategy,
    pub direction: SimDirection,
    /// Largest certified ‖true − approx‖ over all simulated trajectories
    /// (Krylov strategies only).
    pub certified_error: Option<f64>,
    /// Largest Krylov dimension used by any column.
    pub krylov_max_k: Option<usize>,
    /// One (k, bound) checkpoint trace per simulated column, in column
    /// order (empty for non-Krylov strategies; zero columns yield an empty
    /// trace).
    pub krylov_traces: Vec<Vec<(usize, f64)>>,
    /// Peak f64 words of iteration working set over all columns (Krylov
    /// strategies only).
    pub peak_aux_words: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Safe,
    Unsafe,
}

/// Verification outcome. For UNSAFE the witness fields give a concrete
/// initial point (both in initial-set coordinates z and state coordinates
/// x₀ = E·z₀), the offending step, and the outputs the LP found there,
/// together with the relative error of the independent re-simulation.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub steps_total: usize,
    pub steps_checked: usize,
    pub strategy: Strategy,
    pub direction: SimDirection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_z0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_outputs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub krylov_max_k: Option<usize>,
}

fn col_norm(m: &DenseMatrix, c: usize) -> f64 {
    (0..m.rows()).map(|r| m.get(r, c).powi(2)).sum::<f64>().sqrt()
}

/// Pick the simulation operator, start matrix, and projector for a problem
/// under the given direction.
struct Orientation {
    matrix: SparseMatrix,
    /// n×c dense start matrix: columns are simulated.
    start: DenseMatrix,
    /// p×n dense projector applied to every trajectory sample.
    proj: DenseMatrix,
    direction: SimDirection,
}

fn orient(problem: &VerificationProblem, direction: SimDirection) -> Orientation {
    match direction {
        SimDirection::Forward => Orientation {
            matrix: problem.a_matrix.clone(),
            start: problem.init_space.clone(),
            proj: problem.output_matrix.clone(),
            direction,
        },
        SimDirection::Transpose => Orientation {
            matrix: transpose(&problem.a_matrix),
            start: problem.output_matrix.transpose(),
            proj: problem.init_space.transpose(),
            direction,
        },
    }
}

fn pick_direction(problem: &VerificationProblem, options: &VerifyOptions) -> SimDirection {
    options.direction.unwrap_or_else(|| {
        if problem.output_dim() < problem.init_dim() {
            SimDirection::Transpose
        } else {
            SimDirection::Forward
        }
    })
}

fn pick_strategy(problem: &VerificationProblem, options: &VerifyOptions) -> Result<Strategy> {
    if let Some(s) = options.strategy {
        if s == Strategy::KrylovLanczos && !is_symmetric(&problem.a_matrix, 0.0)? {
            return Err(Error::Invalid(
                "the Lanczos strategy requires an exactly symmetric matrix".into(),
            ));
        }
        return Ok(s);
    }
    if problem.n() <= options.dense_cap {
        return Ok(Strategy::DenseExpm);
    }
    if is_symmetric(&problem.a_matrix, 0.0)? {
        Ok(Strategy::KrylovLanczos)
    } else {
        Ok(Strategy::KrylovArnoldi)
    }
}

/// Per-column simulation result: projected samples at every grid node, plus
/// Krylov provenance when applicable.
struct ColumnRun {
    samples: Vec<Vec<f64>>,
    bound: Option<f64>,
    k: Option<usize>,
    trace: Vec<(usize, f64)>,
    peak_words: usize,
}

fn zero_column_run(p: usize, s: usize) -> ColumnRun {
    ColumnRun { samples: vec![vec![0.0; p]; s + 1], bound: None, k: None, trace: vec![], peak_words: 0 }
}

/// Compute all basis matrices B_j for the problem. This is the expensive
/// part of verification; the result can be reused for safety checking and
/// for reachable-projection bounds.
pub fn compute_basis_sequence(
    problem: &VerificationProblem,
    options: &VerifyOptions,
) -> Result<BasisSequence> {
    let strategy = pick_strategy(problem, options)?;
    let direction = pick_direction(problem, options);
    let ori = orient(problem, direction);
    let s = problem.n_steps();
    let delta = problem.step;
    let horizon = problem.time_bound;
    let n_cols = ori.start.cols();
    let p = ori.proj.rows();

    let runs: Vec<ColumnRun> = match strategy {
        Strategy::DenseExpm => {
            let prop = dense::expm(&ori.matrix.to_dense().scaled(delta))?;
            let mut state = ori.start.clone();
            let mut per_step: Vec<DenseMatrix> = Vec::with_capacity(s + 1);
            for _ in 0..=s {
                per_step.push(ori.proj.matmul(&state));
                state = prop.matmul(&state);
            }
            // reshape to per-column sample lists for uniform assembly
            (0..n_cols)
                .map(|c| ColumnRun {
                    samples: per_step.iter().map(|m| m.column(c)).collect(),
                    bound: None,
                    k: None,
                    trace: vec![],
                    peak_words: 0,
                })
                .collect()
        }
        Strategy::Rk45 => {
            let tol = options.rk45_tol;
            (0..n_cols)
                .into_par_iter()
                .map(|c| -> Result<ColumnRun> {
                    let v = ori.start.column(c);
                    if col_norm(&ori.start, c) == 0.0 {
                        return Ok(zero_column_run(p, s));
                    }
                    let deriv = |x: &[f64], out: &mut [f64]| ori.matrix.mul_vec_into(x, out);
                    let nodes = sim::rk45_grid(&deriv, &v, delta, s, tol)?;
                    Ok(ColumnRun {
                        samples: nodes.iter().map(|x| ori.proj.mat_vec(x)).collect(),
                        bound: None,
                        k: None,
                        trace: vec![],
                        peak_words: 0,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        Strategy::KrylovArnoldi | Strategy::KrylovLanczos => {
            // iterate the negated operator: e^{tA}v = e^{-tB}v with B = -A,
            // approximated by ‖v‖·V·e^{-tH}e₁ with certified error
            let b = ori.matrix.negated();
            let nu = krylov::estimate_nu(&b, 1e-6)?;
            (0..n_cols)
                .into_par_iter()
                .map(|c| -> Result<ColumnRun> {
                    let v = ori.start.column(c);
                    if col_norm(&ori.start, c) == 0.0 {
                        return Ok(zero_column_run(p, s));
                    }
                    let run = match strategy {
                        Strategy::KrylovArnoldi => {
                            krylov::arnoldi_adaptive(&b, &v, horizon, options.epsilon, nu, &options.krylov)?
                        }
                        _ => krylov::lanczos_projected_adaptive(
                            &b,
                            &v,
                            &ori.proj,
                            horizon,
                            options.epsilon,
                            nu,
                            &options.krylov,
                        )?,
                    };
                    let grid = krylov::eval_grid(&run.decomposition, delta, s)?;
                    let samples = match strategy {
                        // full basis: samples are state vectors, project them
                        Strategy::KrylovArnoldi => grid.iter().map(|x| ori.proj.mat_vec(x)).collect(),
                        // projected basis: samples already live in output space
                        _ => grid,
                    };
                    Ok(ColumnRun {
                        samples,
                        bound: Some(run.bound),
                        k: Some(run.decomposition.k),
                        trace: run.trace,
                        peak_words: run.peak_aux_words,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    // assemble per-step matrices; under Transpose the simulated columns are
    // output directions, so the per-step stack is the transpose of B_j
    let (o, i) = (problem.output_dim(), problem.init_dim());
    let mut entries = Vec::with_capacity(s + 1);
    for j in 0..=s {
        let mut b = DenseMatrix::zeros(o, i);
        for (c, run) in runs.iter().enumerate() {
            let sample = &run.samples[j];
            match direction {
                SimDirection::Forward => {
                    for r in 0..o {
                        b.set(r, c, sample[r]);
                    }
                }
                SimDirection::Transpose => {
                    for r in 0..i {
                        b.set(c, r, sample[r]);
                    }
                }
            }
        }
        entries.push(b);
    }

    let is_krylov = matches!(strategy, Strategy::KrylovArnoldi | Strategy::KrylovLanczos);
    Ok(BasisSequence {
        entries,
        strategy,
        direction: ori.direction,
        certified_error: if is_krylov {
            Some(runs.iter().filter_map(|r| r.bound).fold(0.0, f64::max))
        } else {
            None
        },
        krylov_max_k: if is_krylov { runs.iter().filter_map(|r| r.k).max() } else { None },
        krylov_traces: if is_krylov { runs.iter().map(|r| r.trace.clone()).collect() } else { vec![] },
        peak_aux_words: if is_krylov { runs.iter().map(|r| r.peak_words).max() } else { None },
    })
}

/// Walk the basis sequence step by step, asking one feasibility LP per step
/// whether the initial set can reach the unsafe set. The first feasible step
/// yields a witness, which is re-simulated with the independent Taylor
/// integrator before UNSAFE is returned.
pub fn check_safety(
    problem: &VerificationProblem,
    basis: &BasisSequence,
    options: &VerifyOptions,
) -> Result<Verdict> {
    let s = problem.n_steps();
    let safe = |checked: usize| Verdict {
        status: Status::Safe,
        steps_total: s + 1,
        steps_checked: checked,
        strategy: basis.strategy,
        direction: basis.direction,
        step_index: None,
        time: None,
        witness_z0: None,
        witness_x0: None,
        witness_outputs: None,
        validation_rel_error: None,
        certified_error: basis.certified_error,
        krylov_max_k: basis.krylov_max_k,
    };
    let Some(unsafe_set) = &problem.unsafe_constraints else {
        // nothing to violate
        return Ok(safe(0));
    };
    if basis.entries.len() != s + 1 {
        return Err(Error::Dimension(format!(
            "basis sequence has {} entries for {} steps",
            basis.entries.len(),
            s + 1
        )));
    }

    let mut warm: Option<WarmStart> = None;
    for j in 0..=s {
        let lp = lp::build_step_lp(&basis.entries[j], &problem.init_constraints, unsafe_set)?;
        let (outcome, next_warm) = lp::solve_with_warm_start(&lp, false, warm.as_ref())?;
        warm = Some(next_warm);
        if outcome.status == LpStatus::Infeasible {
            continue;
        }
        let assignment = outcome.assignment.ok_or_else(|| {
            Error::Numerical("feasible LP returned no assignment".into())
        })?;
        let o = problem.output_dim();
        let outputs = assignment[..o].to_vec();
        let z0 = assignment[o..].to_vec();
        let time = j as f64 * problem.step;
        let rel = validate_counterexample(problem, &z0, j, &outputs)?;
        if rel > options.validation_tol {
            return Err(Error::Numerical(format!(
                "witness at step {j} failed re-validation: relative error {rel:e} exceeds {:e}",
                options.validation_tol
            )));
        }
        return Ok(Verdict {
            status: Status::Unsafe,
            steps_total: s + 1,
            steps_checked: j + 1,
            strategy: basis.strategy,
            direction: basis.direction,
            step_index: Some(j),
            time: Some(time),
            witness_z0: Some(z0.clone()),
            witness_x0: Some(problem.initial_state(&z0)),
            witness_outputs: Some(outputs),
            validation_rel_error: Some(rel),
            certified_error: basis.certified_error,
            krylov_max_k: basis.krylov_max_k,
        });
    }
    Ok(safe(s + 1))
}

/// One-call verification: compute the basis sequence, then decide.
pub fn verify(problem: &VerificationProblem, options: &VerifyOptions) -> Result<Verdict> {
    let basis = compute_basis_sequence(problem, options)?;
    check_safety(problem, &basis, options)
}

/// Re-simulate the trajectory from z₀ with the Taylor integrator (a method
/// family independent of every basis strategy) and measure how far the
/// claimed outputs are from C·x(t), relative to max(1, ‖outputs‖).
pub fn validate_counterexample(
    problem: &VerificationProblem,
    z0: &[f64],
    step_index: usize,
    witness_outputs: &[f64],
) -> Result<f64> {
    if z0.len() != problem.init_dim() {
        return Err(Error::Dimension(format!(
            "witness z0 has {} entries for an initial space of dimension {}",
            z0.len(),
            problem.init_dim()
        )));
    }
    if witness_outputs.len() != problem.output_dim() {
        return Err(Error::Dimension(format!(
            "witness has {} outputs, problem has {}",
            witness_outputs.len(),
            problem.output_dim()
        )));
    }
    if step_index > problem.n_steps() {
        return Err(Error::Invalid(format!(
            "step index {step_index} exceeds the horizon ({} steps)",
            problem.n_steps()
        )));
    }
    let x0 = problem.initial_state(z0);
    let t = step_index as f64 * problem.step;
    let x_t = sim::propagate_taylor(&problem.a_matrix, &x0, t)?;
    let y_sim = problem.output_matrix.mat_vec(&x_t);
    let diff: f64 = y_sim
        .iter()
        .zip(witness_outputs)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = witness_outputs.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(diff / scale.max(1.0))
}

/// Tight per-step, per-output intervals of the reachable projection: for
/// every step j and output row r, minimize and maximize y_r = (B_j z)_r over
/// the initial polytope. Unsafe constraints play no part here.
pub fn project_bounds(
    problem: &VerificationProblem,
    basis: &BasisSequence,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let s = problem.n_steps();
    if basis.entries.len() != s + 1 {
        return Err(Error::Dimension(format!(
            "basis sequence has {} entries for {} steps",
            basis.entries.len(),
            s + 1
        )));
    }
    let o = problem.output_dim();
    let i = problem.init_dim();
    let no_unsafe = LinearConstraintSet::empty(o);
    let mut result = vec![Vec::with_capacity(o); s + 1];
    for r in 0..o {
        let mut objective = vec![0.0; o + i];
        objective[r] = 1.0;
        let mut lows = Vec::with_capacity(s + 1);
        let mut highs = Vec::with_capacity(s + 1);
        for (sense, acc) in [(Sense::Minimize, &mut lows), (Sense::Maximize, &mut highs)] {
            let mut warm: Option<WarmStart> = None;
            for j in 0..=s {
                let mut lp = lp::build_step_lp(&basis.entries[j], &problem.init_constraints, &no_unsafe)?;
                lp.objective = Some((objective.clone(), sense));
                let (outcome, next_warm) = lp::solve_with_warm_start(&lp, true, warm.as_ref())?;
                warm = Some(next_warm);
                match outcome.status {
                    LpStatus::Optimal => acc.push(outcome.objective_value.ok_or_else(|| {
                        Error::Numerical("optimal LP returned no objective value".into())
                    })?),
                    LpStatus::Infeasible => {
                        return Err(Error::Invalid("initial set is infeasible".into()))
                    }
                    _ => {
                        return Err(Error::Numerical(format!(
                            "projection LP at step {j} did not reach an optimum (initial set unbounded?)"
                        )))
                    }
                }
            }
        }
        for j in 0..=s {
            result[j].push((lows[j], highs[j]));
        }
    }
    Ok(result)
}

/// Working-set estimate in bytes for verifying an (n, i, o, s) problem with
/// the given strategy at Krylov dimension k. The stored basis sequence
/// (8·o·i·s bytes) is counted for every strategy; the per-trajectory working
/// set depends on the strategy:
///   dense    8·(n² + n·max(i,o))
///   rk45     8·10n
///   arnoldi  8·k·(n + k)
///   lanczos  8·(3k + n·min(i,o) + 3n)
pub fn estimate_memory(strategy: Strategy, n: u64, i: u64, o: u64, s: u64, k: u64) -> u64 {
    let basis = 8 * o * i * s;
    let working = match strategy {
        Strategy::DenseExpm => 8 * (n * n + n * i.max(o)),
        Strategy::Rk45 => 8 * 10 * n,
        Strategy::KrylovArnoldi => 8 * k * (n + k),
        Strategy::KrylovLanczos => 8 * (3 * k + n * i.min(o) + 3 * n),
    };
    basis + working
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConstraintKind;

    /// Harmonic oscillator with a forcing clock: z₁ ∈ [0,1] scales the
    /// velocity mode, z₂ = 1 pins the constant mode; unsafe when the first
    /// state coordinate equals 4.
    fn oscillator_problem(unsafe_level: f64) -> VerificationProblem {
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

    fn options(strategy: Strategy) -> VerifyOptions {
        VerifyOptions { strategy: Some(strategy), ..VerifyOptions::default() }
    }

    #[test]
    fn oscillator_unsafe_at_step_three() {
        let problem = oscillator_problem(4.0);
        let verdict = verify(&problem, &VerifyOptions::default()).unwrap();
        assert_eq!(verdict.status, Status::Unsafe);
        assert_eq!(verdict.step_index, Some(3));
        let t = verdict.time.unwrap();
        assert!((t - 3.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-9);
        let z0 = verdict.witness_z0.unwrap();
        assert!((z0[0] - 0.65685424949238058).abs() < 1e-4, "witness z1 = {}", z0[0]);
        assert!((z0[1] - 1.0).abs() < 1e-9);
        assert!(verdict.validation_rel_error.unwrap() <= 1e-9);
        let y = verdict.witness_outputs.unwrap();
        assert!((y[0] - 4.0).abs() < 1e-9);
        // x0 = E z0
        let x0 = verdict.witness_x0.unwrap();
        assert!((x0[0] + 5.0).abs() < 1e-9 && (x0[1] - z0[0]).abs() < 1e-12);
    }

    #[test]
    fn oscillator_safe_when_threshold_unreachable() {
        let problem = oscillator_problem(6.0);
        let verdict = verify(&problem, &VerifyOptions::default()).unwrap();
        assert_eq!(verdict.status, Status::Safe);
        assert_eq!(verdict.steps_checked, 5);
    }

    #[test]
    fn strategies_and_directions_agree_on_oscillator() {
        let problem = oscillator_problem(4.0);
        let reference = compute_basis_sequence(&problem, &options(Strategy::DenseExpm)).unwrap();
        for strategy in [Strategy::DenseExpm, Strategy::Rk45, Strategy::KrylovArnoldi] {
            for direction in [SimDirection::Forward, SimDirection::Transpose] {
                let opts = VerifyOptions {
                    strategy: Some(strategy),
                    direction: Some(direction),
                    ..VerifyOptions::default()
                };
                let basis = compute_basis_sequence(&problem, &opts).unwrap();
                assert_eq!(basis.entries.len(), reference.entries.len());
                for (j, (a, b)) in basis.entries.iter().zip(&reference.entries).enumerate() {
                    for r in 0..a.rows() {
                        for c in 0..a.cols() {
                            assert!(
                                (a.get(r, c) - b.get(r, c)).abs() < 1e-7,
                                "{strategy} {direction:?} step {j} entry ({r},{c}): {} vs {}",
                                a.get(r, c),
                                b.get(r, c)
                            );
                        }
                    }
                }
                let verdict = verify(&problem, &opts).unwrap();
                assert_eq!(verdict.status, Status::Unsafe);
                assert_eq!(verdict.step_index, Some(3));
            }
        }
    }

    #[test]
    fn lanczos_rejected_on_nonsymmetric() {
        let problem = oscillator_problem(4.0);
        let err = verify(&problem, &options(Strategy::KrylovLanczos)).unwrap_err();
        assert!(err.to_string().contains("symmetric"));
    }

    #[test]
    fn basis_step_zero_is_c_times_e() {
        let problem = oscillator_problem(4.0);
        for direction in [SimDirection::Forward, SimDirection::Transpose] {
            let opts = VerifyOptions { direction: Some(direction), ..VerifyOptions::default() };
            let basis = compute_basis_sequence(&problem, &opts).unwrap();
            let b0 = &basis.entries[0];
            // C·E for the oscillator: row (0, −5)
            assert!((b0.get(0, 0) - 0.0).abs() < 1e-12);
            assert!((b0.get(0, 1) + 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn known_basis_row_at_step_three() {
        let problem = oscillator_problem(4.0);
        let basis = compute_basis_sequence(&problem, &VerifyOptions::default()).unwrap();
        let t = 3.0 * std::f64::consts::FRAC_PI_4;
        let b3 = &basis.entries[3];
        assert!((b3.get(0, 0) - t.sin()).abs() < 1e-12);
        assert!((b3.get(0, 1) + 5.0 * t.cos()).abs() < 1e-12);
    }

    #[test]
    fn bounds_bracket_simulations_and_match_known_extremes() {
        let problem = oscillator_problem(4.0);
        let basis = compute_basis_sequence(&problem, &VerifyOptions::default()).unwrap();
        let bounds = project_bounds(&problem, &basis).unwrap();
        assert_eq!(bounds.len(), 5);
        let t = 3.0 * std::f64::consts::FRAC_PI_4;
        let (lo, hi) = bounds[3][0];
        // y(t) = z1·sin t − 5·cos t over z1 ∈ [0,1]
        assert!((lo - (-5.0 * t.cos())).abs() < 1e-9);
        assert!((hi - (t.sin() - 5.0 * t.cos())).abs() < 1e-9);
        assert!(lo <= hi);
        // every step: min ≤ max, and a sampled trajectory stays inside
        for j in 0..=4 {
            let (lo, hi) = bounds[j][0];
            assert!(lo <= hi + 1e-12);
            let tj = j as f64 * problem.step;
            for z1 in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let y = z1 * tj.sin() - 5.0 * tj.cos();
                assert!(y >= lo - 1e-9 && y <= hi + 1e-9, "step {j}, z1 {z1}");
            }
        }
    }

    #[test]
    fn validation_rejects_forged_witness() {
        let problem = oscillator_problem(4.0);
        // claim outputs that the true flow does not produce
        let rel = validate_counterexample(&problem, &[0.5, 1.0], 3, &[10.0]).unwrap();
        assert!(rel > 0.5);
    }

    #[test]
    fn no_unsafe_set_is_trivially_safe() {
        let mut problem = oscillator_problem(4.0);
        problem.unsafe_constraints = None;
        let verdict = verify(&problem, &VerifyOptions::default()).unwrap();
        assert_eq!(verdict.status, Status::Safe);
        assert_eq!(verdict.steps_checked, 0);
    }

    #[test]
    fn zero_start_column_yields_zero_basis_column() {
        // E with a zero column: that column's trajectory is identically zero
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let e = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let init = LinearConstraintSet::from_intervals(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let c = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let problem =
            VerificationProblem::new(a, e, init, c, None, 0.1, 1.0).unwrap();
        for strategy in [Strategy::DenseExpm, Strategy::Rk45, Strategy::KrylovArnoldi] {
            let opts = VerifyOptions {
                strategy: Some(strategy),
                direction: Some(SimDirection::Forward),
                ..VerifyOptions::default()
            };
            let basis = compute_basis_sequence(&problem, &opts).unwrap();
            for entry in &basis.entries {
                assert_eq!(entry.get(0, 1), 0.0, "{strategy}");
            }
        }
    }

    #[test]
    fn krylov_provenance_is_reported() {
        let problem = oscillator_problem(4.0);
        // auto direction is Transpose here (1 output < 2 start columns)
        let auto = compute_basis_sequence(&problem, &options(Strategy::KrylovArnoldi)).unwrap();
        assert_eq!(auto.direction, SimDirection::Transpose);
        assert_eq!(auto.krylov_traces.len(), 1);
        let opts = VerifyOptions {
            strategy: Some(Strategy::KrylovArnoldi),
            direction: Some(SimDirection::Forward),
            ..VerifyOptions::default()
        };
        let basis = compute_basis_sequence(&problem, &opts).unwrap();
        assert!(basis.certified_error.is_some());
        assert!(basis.certified_error.unwrap() <= VerifyOptions::default().epsilon);
        assert!(basis.krylov_max_k.unwrap() <= 4);
        assert_eq!(basis.krylov_traces.len(), 2, "one trace per start column");
        assert!(basis.peak_aux_words.unwrap() > 0);
    }

    #[test]
    fn memory_formulas() {
        // worked example: 2 outputs, 10 start columns, 20000 steps
        assert_eq!(estimate_memory(Strategy::Rk45, 10913, 10, 2, 20000, 0) - 8 * 10 * 10913, 3_200_000);
        assert_eq!(
            estimate_memory(Strategy::KrylovArnoldi, 1000, 1, 1, 0, 60),
            8 * 60 * (1000 + 60)
        );
        assert_eq!(
            estimate_memory(Strategy::KrylovLanczos, 1000, 4, 2, 0, 60),
            8 * (3 * 60 + 1000 * 2 + 3 * 1000)
        );
        assert_eq!(
            estimate_memory(Strategy::DenseExpm, 100, 3, 2, 10, 0),
            8 * (2 * 3 * 10) + 8 * (100 * 100 + 100 * 3)
        );
    }

    #[test]
    fn verdict_serializes_cleanly() {
        let problem = oscillator_problem(4.0);
        let verdict = verify(&problem, &VerifyOptions::default()).unwrap();
        let json = serde_json::to_string_pretty(&verdict).unwrap();
        assert!(json.contains("\"status\": \"UNSAFE\""));
        assert!(json.contains("\"step_index\": 3"));
        let safe = verify(&oscillator_problem(6.0), &VerifyOptions::default()).unwrap();
        let json = serde_json::to_string(&safe).unwrap();
        assert!(json.contains("\"SAFE\""));
        assert!(!json.contains("witness"), "SAFE verdicts must omit witness fields");
    }
}
