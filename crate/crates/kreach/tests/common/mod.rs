//! Shared oracles and generators for the integration suites.
//!
//! Everything here is implemented independently of the library's own
//! numerics (plain nested-Vec matrices, Taylor-series exponential, Jacobi
//! eigenvalues, classic RK4) so that tests always cross-check two different
//! computations of the same quantity.

#![allow(dead_code)]

use kreach::model::SparseMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Plain dense helpers (oracle side)
// ---------------------------------------------------------------------------

pub type Mat = Vec<Vec<f64>>;

pub fn mat_zeros(n: usize) -> Mat {
    vec![vec![0.0; n]; n]
}

pub fn mat_identity(n: usize) -> Mat {
    let mut m = mat_zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let p = b[0].len();
    let mut out = vec![vec![0.0; p]; n];
    for (row_out, row_a) in out.iter_mut().zip(a) {
        for (k, &aik) in row_a.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in row_out.iter_mut().zip(&b[k]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

pub fn mat_vec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(c, v)| c * v).sum()).collect()
}

pub fn mat_scale(a: &Mat, f: f64) -> Mat {
    a.iter().map(|row| row.iter().map(|c| c * f).collect()).collect()
}

pub fn mat_norm_inf(a: &Mat) -> f64 {
    a.iter().map(|row| row.iter().map(|c| c.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// View a library CSR matrix as a nested-Vec dense matrix.
pub fn sparse_to_mat(a: &SparseMatrix) -> Mat {
    let (r, c) = (a.n_rows(), a.n_cols());
    (0..r).map(|i| (0..c).map(|j| a.get(i, j)).collect()).collect()
}

pub fn symmetric_part(a: &Mat) -> Mat {
    let n = a.len();
    let mut s = mat_zeros(n);
    for i in 0..n {
        for j in 0..n {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Matrix exponential oracle: Taylor series with scaling and squaring
// ---------------------------------------------------------------------------

/// e^{tA} by scaling-and-squaring Taylor summation.  Slow and simple; kept
/// deliberately different from the library's Padé implementation.
pub fn expm_oracle(a: &Mat, t: f64) -> Mat {
    let n = a.len();
    let b = mat_scale(a, t);
    let norm = mat_norm_inf(&b);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let small = mat_scale(&b, 0.5f64.powi(s as i32));

    let mut sum = mat_identity(n);
    let mut term = mat_identity(n);
    for k in 1..500 {
        term = mat_mul(&term, &small);
        term = mat_scale(&term, 1.0 / k as f64);
        let mut largest = 0.0f64;
        for (srow, trow) in sum.iter_mut().zip(&term) {
            for (sv, tv) in srow.iter_mut().zip(trow) {
                *sv += tv;
                largest = largest.max(tv.abs());
            }
        }
        if largest < 1e-20 * (1.0 + mat_norm_inf(&sum)) {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..s {
        result = mat_mul(&result, &result);
    }
    result
}

/// Oracle trajectory point e^{tA}·v.
pub fn expm_vec_oracle(a: &Mat, t: f64, v: &[f64]) -> Vec<f64> {
    mat_vec(&expm_oracle(a, t), v)
}

// ---------------------------------------------------------------------------
// Jacobi eigenvalue oracle (symmetric matrices)
// ---------------------------------------------------------------------------

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending.
pub fn jacobi_eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.len();
    let mut a = m.clone();
    let scale = mat_norm_inf(&a).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                // standard two-sided rotation zeroing a[p][q]
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Oracle for ν(A): smallest eigenvalue of the symmetric part.
pub fn nu_oracle(a: &Mat) -> f64 {
    jacobi_eigenvalues(&symmetric_part(a))[0]
}

// ---------------------------------------------------------------------------
// Classic RK4 (oracle integrator, fixed step)
// ---------------------------------------------------------------------------

pub fn rk4(deriv: impl Fn(&[f64], &mut [f64]), y0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let n = y0.len();
    let h = t / steps as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    for _ in 0..steps {
        deriv(&y, &mut k1);
        for i in 0..n {
            stage[i] = y[i] + 0.5 * h * k1[i];
        }
        deriv(&stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + 0.5 * h * k2[i];
        }
        deriv(&stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * k3[i];
        }
        deriv(&stage, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

// ---------------------------------------------------------------------------
// Random test systems
// ---------------------------------------------------------------------------

/// Random sparse matrix with entries in [-1,1], a full diagonal, and a
/// `shift` subtracted on the diagonal (push the spectrum left).
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64, shift: f64) -> SparseMatrix {
    let mut triplets = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if r == c {
                triplets.push((r, c, rng.gen_range(-1.0..1.0) - shift));
            } else if rng.gen::<f64>() < density {
                triplets.push((r, c, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).unwrap()
}

/// Random symmetric sparse matrix (upper triangle mirrored).
pub fn random_symmetric_sparse(
    rng: &mut ChaCha8Rng,
    n: usize,
    density: f64,
    shift: f64,
) -> SparseMatrix {
    let mut triplets = Vec::new();
    for r in 0..n {
        triplets.push((r, r, rng.gen_range(-1.0..1.0) - shift));
        for c in (r + 1)..n {
            if rng.gen::<f64>() < density {
                let v = rng.gen_range(-1.0..1.0);
                triplets.push((r, c, v));
                triplets.push((c, r, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rescale_to_norm(triplets: &mut [(usize, usize, f64)], n: usize, target: f64) {
    let mut row_sums = vec![0.0f64; n];
    for &(r, _, v) in triplets.iter() {
        row_sums[r] += v.abs();
    }
    let max = row_sums.iter().fold(0.0f64, |a, &b| a.max(b));
    if max > 0.0 {
        let f = target / max;
        for t in triplets.iter_mut() {
            t.2 *= f;
        }
    }
}

/// Random sparse matrix rescaled so ‖A‖∞ equals `norm` (keeps τ·‖A‖ in the
/// regime where a Krylov space of dimension well below n converges).
pub fn random_sparse_with_norm(
    rng: &mut ChaCha8Rng,
    n: usize,
    density: f64,
    norm: f64,
) -> SparseMatrix {
    let mut triplets = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if r == c {
                triplets.push((r, c, rng.gen_range(-1.0..1.0) - 1.0));
            } else if rng.gen::<f64>() < density {
                triplets.push((r, c, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    rescale_to_norm(&mut triplets, n, norm);
    SparseMatrix::from_triplets(n, n, &triplets).unwrap()
}

/// Symmetric variant of [`random_sparse_with_norm`].
pub fn random_symmetric_with_norm(
    rng: &mut ChaCha8Rng,
    n: usize,
    density: f64,
    norm: f64,
) -> SparseMatrix {
    let mut triplets = Vec::new();
    for r in 0..n {
        triplets.push((r, r, rng.gen_range(-1.0..1.0) - 1.0));
        for c in (r + 1)..n {
            if rng.gen::<f64>() < density {
                let v = rng.gen_range(-1.0..1.0);
                triplets.push((r, c, v));
                triplets.push((c, r, v));
            }
        }
    }
    rescale_to_norm(&mut triplets, n, norm);
    SparseMatrix::from_triplets(n, n, &triplets).unwrap()
}
