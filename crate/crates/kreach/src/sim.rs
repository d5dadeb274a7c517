//! Time integrators: an adaptive Dormand–Prince 4(5) pair for trajectory
//! simulation on a fixed output grid, and a scaled Taylor-series propagator
//! used to validate counter-examples with an independent method family.

use crate::error::{Error, Result};
use crate::model::SparseMatrix;

// Dormand–Prince 4(5) Butcher tableau. The last stage row equals the 5th
// order weights (FSAL), and ERR holds b − b̂ for the embedded estimate.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate y' = f(y) from y0 over `count` uniform output intervals of
/// `step`, invoking `on_node(j, y(j·step))` for j = 0..=count. Steps are
/// adapted to the local error `tol` and clamped so every grid node is hit
/// exactly.
pub(crate) fn rk45_scan(
    deriv: &dyn Fn(&[f64], &mut [f64]),
    y0: &[f64],
    step: f64,
    count: usize,
    tol: f64,
    on_node: &mut dyn FnMut(usize, &[f64]),
) -> Result<()> {
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    on_node(0, &y);
    if count == 0 {
        return Ok(());
    }
    deriv(&y, &mut k1);
    let total = step * count as f64;
    let mut h = (step / 8.0).min(total / 64.0).max(1e-12 * total);
    let min_h = 1e-14 * total.max(step);

    for node in 1..=count {
        let t_target = step; // local time remaining within this segment
        let mut t_local = 0.0;
        while t_local < t_target {
            let mut hh = h.min(t_target - t_local);
            if hh < min_h {
                hh = min_h;
            }
            // stages
            for i in 0..n {
                stage[i] = y[i] + hh * A21 * k1[i];
            }
            deriv(&stage, &mut k2);
            for i in 0..n {
                stage[i] = y[i] + hh * (A31 * k1[i] + A32 * k2[i]);
            }
            deriv(&stage, &mut k3);
            for i in 0..n {
                stage[i] = y[i] + hh * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            deriv(&stage, &mut k4);
            for i in 0..n {
                stage[i] = y[i] + hh * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            deriv(&stage, &mut k5);
            for i in 0..n {
                stage[i] =
                    y[i] + hh * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            deriv(&stage, &mut k6);
            for i in 0..n {
                y_new[i] = y[i] + hh * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            deriv(&y_new, &mut k7);

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = hh
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = tol + tol * y[i].abs().max(y_new[i].abs());
                let q = e / scale;
                err_sq += q * q;
            }
            let err = (err_sq / n as f64).sqrt();

            if err <= 1.0 || hh <= min_h * 1.0001 {
                if !y_new.iter().all(|v| v.is_finite()) {
                    return Err(Error::Numerical("integration diverged to non-finite values".into()));
                }
                t_local += hh;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7); // FSAL
            }
            let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            h = (hh * factor.clamp(0.2, 5.0)).min(total);
            if h < min_h {
                if err > 1.0 {
                    return Err(Error::Numerical(
                        "integration step size underflow; system too stiff for the tolerance".into(),
                    ));
                }
                h = min_h;
            }
        }
        on_node(node, &y);
    }
    Ok(())
}

/// rk45_scan collecting all grid states.
pub(crate) fn rk45_grid(
    deriv: &dyn Fn(&[f64], &mut [f64]),
    y0: &[f64],
    step: f64,
    count: usize,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(count + 1);
    rk45_scan(deriv, y0, step, count, tol, &mut |_, y| out.push(y.to_vec()))?;
    Ok(out)
}

/// x(t) = e^{At}x₀ by Taylor series with norm-scaled substeps: the horizon is
/// split so ‖A‖h ≤ 1/2 per substep and each substep sums terms until they
/// fall below machine level. Matrix-free; deliberately a different method
/// family from both the Krylov evaluation and the Runge–Kutta pair so it can
/// serve as an independent validation of counter-example trajectories.
pub fn propagate_taylor(a: &SparseMatrix, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension("propagation needs a square matrix".into()));
    }
    if x0.len() != a.n_cols() {
        return Err(Error::Dimension(format!(
            "state has {} entries but the system has {} variables",
            x0.len(),
            a.n_cols()
        )));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Dimension(format!("propagation time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let norm = a.norm_inf();
    let substeps = ((norm * t / 0.5).ceil() as usize).max(1);
    let h = t / substeps as f64;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..substeps {
        term.copy_from_slice(&x);
        let base: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let mut q = 1usize;
        loop {
            a.mul_vec_into(&term, &mut next);
            let f = h / q as f64;
            for (ti, ni) in term.iter_mut().zip(&next) {
                *ti = f * ni;
            }
            for (xi, ti) in x.iter_mut().zip(&term) {
                *xi += ti;
            }
            let tnorm: f64 = term.iter().map(|v| v * v).sum::<f64>().sqrt();
            if tnorm <= 1e-16 * base {
                break;
            }
            q += 1;
            if q > 120 {
                return Err(Error::Numerical(
                    "Taylor propagation failed to converge within 120 terms per substep".into(),
                ));
            }
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("Taylor propagation produced non-finite values".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{expm, DenseMatrix};

    fn sparse(rows: &[Vec<f64>]) -> SparseMatrix {
        SparseMatrix::from_dense(rows).unwrap()
    }

    #[test]
    fn rk45_matches_exponential_on_rotation() {
        let a = sparse(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let deriv = move |y: &[f64], dy: &mut [f64]| a.mul_vec_into(y, dy);
        let states = rk45_grid(&deriv, &[1.0, 0.0], 0.1, 63, 1e-9).unwrap();
        for (j, s) in states.iter().enumerate() {
            let t = 0.1 * j as f64;
            assert!((s[0] - t.cos()).abs() < 1e-7, "node {j}: {} vs {}", s[0], t.cos());
            assert!((s[1] + t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn rk45_handles_stiff_decay() {
        let a = sparse(&[vec![-80.0]]);
        let deriv = move |y: &[f64], dy: &mut [f64]| a.mul_vec_into(y, dy);
        let states = rk45_grid(&deriv, &[1.0], 0.05, 20, 1e-9).unwrap();
        for (j, s) in states.iter().enumerate() {
            let exact = (-80.0 * 0.05 * j as f64).exp();
            assert!((s[0] - exact).abs() < 1e-8, "node {j}");
        }
    }

    #[test]
    fn rk45_node_zero_is_initial_state() {
        let a = sparse(&[vec![0.3]]);
        let deriv = move |y: &[f64], dy: &mut [f64]| a.mul_vec_into(y, dy);
        let states = rk45_grid(&deriv, &[2.5], 1.0, 0, 1e-9).unwrap();
        assert_eq!(states, vec![vec![2.5]]);
    }

    #[test]
    fn taylor_matches_expm_oracle() {
        let rows = vec![
            vec![0.2, -1.1, 0.4, 0.0],
            vec![1.0, 0.0, -0.3, 0.2],
            vec![0.0, 0.6, -0.5, 0.1],
            vec![-0.2, 0.0, 0.3, 0.1],
        ];
        let a = sparse(&rows);
        let dense = DenseMatrix::from_rows(&rows).unwrap();
        let x0 = vec![1.0, -0.5, 0.25, 2.0];
        for &t in &[0.0, 0.3, 1.7, 6.0] {
            let got = propagate_taylor(&a, &x0, t).unwrap();
            let want = expm(&dense.scaled(t)).unwrap().mat_vec(&x0);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-11 * (1.0 + w.abs()), "t={t}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn taylor_agrees_with_rk45() {
        let rows = vec![vec![0.0, 1.0, 0.0], vec![-4.0, -0.2, 0.5], vec![0.1, 0.0, -1.0]];
        let a = sparse(&rows);
        let x0 = vec![0.3, 0.0, -1.0];
        let t = 2.4;
        let taylor = propagate_taylor(&a, &x0, t).unwrap();
        let a2 = a.clone();
        let deriv = move |y: &[f64], dy: &mut [f64]| a2.mul_vec_into(y, dy);
        let rk = rk45_grid(&deriv, &x0, t, 1, 1e-11).unwrap();
        for (g, w) in taylor.iter().zip(&rk[1]) {
            assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
    }

    #[test]
    fn taylor_rejects_negative_time() {
        let a = sparse(&[vec![1.0]]);
        assert!(propagate_taylor(&a, &[1.0], -1.0).is_err());
    }
}
