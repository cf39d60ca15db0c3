//! Dense matrix/vector kernel for small (n ≤ ~16) problems.
//!
//! Everything here is a pure function of its value inputs: Cholesky-based SPD
//! solves, a symmetric eigenvalue routine for conditioning checks, power
//! iteration for step-size bounds, and a central finite-difference gradient
//! used to validate analytic gradients elsewhere in the crate.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Dense column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Mat {
    /// Build from row-major entries; rejects empty shapes, wrong entry counts
    /// and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Mat> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument {
                op: "Mat::new",
                reason: format!("shape {rows}x{cols} must be at least 1x1"),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument {
                op: "Mat::new",
                reason: format!("{} entries for shape {rows}x{cols}", data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "Mat::new" });
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Mat> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument {
                op: "Mat::from_rows",
                reason: "ragged rows".into(),
            });
        }
        Mat::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Mat {
        let n = entries.len();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = entries[i];
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimMismatch {
                op: "matmul",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: other.rows,
                rhs_cols: other.cols,
            });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.dim() {
            return Err(Error::DimMismatch {
                op: "mul_vec",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: v.dim(),
                rhs_cols: 1,
            });
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.data[i * self.cols + j] * v.data[j];
            }
            out[i] = acc;
        }
        Ok(Vector { data: out })
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "Mat::add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "Mat::sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimMismatch {
                op,
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: other.rows,
                rhs_cols: other.cols,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// (M + Mᵀ)/2, used to stop covariance symmetry from drifting.
    pub fn symmetrize(&self) -> Mat {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Outer product u·vᵀ.
    pub fn outer(u: &Vector, v: &Vector) -> Mat {
        let mut out = Mat::zeros(u.dim(), v.dim());
        for i in 0..u.dim() {
            for j in 0..v.dim() {
                out.data[i * v.dim() + j] = u.data[i] * v.data[j];
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector {
            data: (0..self.rows).map(|i| self.get(i, j)).collect(),
        }
    }
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Vector> {
        if data.is_empty() {
            return Err(Error::InvalidArgument {
                op: "Vector::new",
                reason: "dimension must be at least 1".into(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "Vector::new" });
        }
        Ok(Vector { data })
    }

    pub fn zeros(n: usize) -> Vector {
        Vector { data: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, "Vector::add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, "Vector::sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Vector,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Vector> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                op,
                lhs_rows: self.dim(),
                lhs_cols: 1,
                rhs_rows: other.dim(),
                rhs_cols: 1,
            });
        }
        Ok(Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector {
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                op: "Vector::dot",
                lhs_rows: self.dim(),
                lhs_cols: 1,
                rhs_rows: other.dim(),
                rhs_cols: 1,
            });
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.data
    }
}

fn check_symmetric(m: &Mat, op: &'static str, rel_tol: f64) -> Result<()> {
    if m.rows != m.cols {
        return Err(Error::NotSquare {
            op,
            rows: m.rows,
            cols: m.cols,
        });
    }
    let scale = m.max_abs().max(1.0);
    let mut max_asym: f64 = 0.0;
    for i in 0..m.rows {
        for j in (i + 1)..m.cols {
            max_asym = max_asym.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    if max_asym > rel_tol * scale {
        return Err(Error::NotSymmetric { op, max_asym });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &Mat) -> Result<Mat> {
    check_symmetric(m, "cholesky", 1e-10)?;
    let n = m.rows;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::NotPositiveDefinite {
                        op: "cholesky",
                        pivot: sum,
                        index: i,
                    });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Cholesky-like factor for positive *semi*-definite matrices: zero pivots are
/// tolerated (the corresponding column is zeroed). Used to turn a noise
/// covariance into a sampling transform, where exact zeros are legitimate.
pub fn psd_factor(m: &Mat) -> Result<Mat> {
    check_symmetric(m, "psd_factor", 1e-10)?;
    let n = m.rows;
    let scale = m.max_abs().max(1.0);
    let tol = 1e-12 * scale;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum < -tol {
                    return Err(Error::NotPositiveDefinite {
                        op: "psd_factor",
                        pivot: sum,
                        index: i,
                    });
                }
                l.set(i, j, if sum > tol { sum.sqrt() } else { 0.0 });
            } else {
                let d = l.get(j, j);
                l.set(i, j, if d > 0.0 { sum / d } else { 0.0 });
            }
        }
    }
    Ok(l)
}

/// Solve m·v = rhs for symmetric positive-definite m.
///
/// The residual satisfies ‖m·v − rhs‖∞ ≤ 1e-9·max(1, ‖rhs‖∞) for the
/// conditioning this crate works at (checked in tests).
pub fn solve_spd(m: &Mat, rhs: &Vector) -> Result<Vector> {
    if m.rows != rhs.dim() {
        return Err(Error::DimMismatch {
            op: "solve_spd",
            lhs_rows: m.rows,
            lhs_cols: m.cols,
            rhs_rows: rhs.dim(),
            rhs_cols: 1,
        });
    }
    let l = cholesky(m)?;
    Ok(cholesky_solve(&l, rhs))
}

fn cholesky_solve(l: &Mat, rhs: &Vector) -> Vector {
    let n = l.rows;
    // forward substitution L·y = rhs
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = rhs.data[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    // back substitution Lᵀ·x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Vector { data: x }
}

/// Solve m·X = rhs column-by-column for SPD m.
pub fn solve_spd_mat(m: &Mat, rhs: &Mat) -> Result<Mat> {
    if m.rows != rhs.rows {
        return Err(Error::DimMismatch {
            op: "solve_spd_mat",
            lhs_rows: m.rows,
            lhs_cols: m.cols,
            rhs_rows: rhs.rows,
            rhs_cols: rhs.cols,
        });
    }
    let l = cholesky(m)?;
    let mut out = Mat::zeros(rhs.rows, rhs.cols);
    for j in 0..rhs.cols {
        let x = cholesky_solve(&l, &rhs.column(j));
        for i in 0..rhs.rows {
            out.set(i, j, x.data[i]);
        }
    }
    Ok(out)
}

/// Inverse of an SPD matrix (solve against the identity).
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    solve_spd_mat(m, &Mat::identity(m.rows))
}

/// All eigenvalues of a symmetric matrix via cyclic Jacobi rotations,
/// ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    check_symmetric(m, "sym_eigenvalues", 1e-8)?;
    let n = m.rows;
    let mut a = m.symmetrize();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() <= 1e-14 * a.max_abs().max(1.0) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eig)
}

/// True iff m is symmetric within tol and has no eigenvalue below −tol.
pub fn is_psd(m: &Mat, tol: f64) -> Result<bool> {
    if m.rows != m.cols {
        return Err(Error::NotSquare {
            op: "is_psd",
            rows: m.rows,
            cols: m.cols,
        });
    }
    for i in 0..m.rows {
        for j in (i + 1)..m.cols {
            if (m.get(i, j) - m.get(j, i)).abs() > tol {
                return Ok(false);
            }
        }
    }
    let eig = sym_eigenvalues(m)?;
    Ok(eig.first().map_or(true, |lo| *lo >= -tol))
}

/// Condition number of a symmetric positive-definite matrix.
pub fn spd_condition(m: &Mat) -> Result<f64> {
    let eig = sym_eigenvalues(m)?;
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            op: "spd_condition",
            pivot: lo,
            index: 0,
        });
    }
    Ok(hi / lo)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
/// Deterministic start vector; `iters` around 20–50 is plenty for the
/// step-size bounds this crate needs.
pub fn power_iter_lambda_max(m: &Mat, iters: usize) -> Result<f64> {
    check_symmetric(m, "power_iter_lambda_max", 1e-8)?;
    let n = m.rows;
    // slightly uneven start so it is not orthogonal to the top eigenvector
    let mut v = Vector::new((0..n).map(|i| 1.0 + 0.01 * i as f64).collect())?;
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = m.mul_vec(&v)?;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        lambda = v.dot(&w)? / v.dot(&v)?;
        v = w.scale(1.0 / norm);
    }
    Ok(lambda)
}

/// Central-difference gradient of f at x: ((f(x+εeᵢ) − f(x−εeᵢ))/2ε)ᵢ.
pub fn finite_diff_grad<F>(f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument {
            op: "finite_diff_grad",
            reason: format!("eps must be positive, got {eps}"),
        });
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let fp = f(&probe);
        probe[i] = x[i] - eps;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                op: "finite_diff_grad",
            });
        }
        grad.push((fp - fm) / (2.0 * eps));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        Mat::new(rows, cols, data).unwrap()
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        let g = random_mat(rng, n, n);
        g.transpose()
            .matmul(&g)
            .unwrap()
            .add(&Mat::identity(n))
            .unwrap()
    }

    #[test]
    fn matmul_identity_leaves_matrix_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_mat(&mut rng, 3, 3);
        let out = Mat::identity(3).matmul(&m).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn matmul_hand_example() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[&[0.0], &[1.0]]).unwrap();
        let out = a.matmul(&b).unwrap();
        assert_eq!(out.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        // independent brute-force product as the oracle
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_mat(&mut rng, 4, 5);
        let b = random_mat(&mut rng, 5, 2);
        let out = a.matmul(&b).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..5 {
                    acc += a.get(i, k) * b.get(k, j);
                }
                assert!((out.get(i, j) - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_reports_both_shapes() {
        let a = Mat::zeros(2, 3);
        let b = Mat::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "got: {msg}");
    }

    #[test]
    fn solve_spd_identity_returns_rhs() {
        let rhs = Vector::new(vec![3.0, -1.0, 0.5]).unwrap();
        let x = solve_spd(&Mat::identity(3), &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn solve_spd_diagonal() {
        let m = Mat::diag(&[2.0, 4.0]);
        let x = solve_spd(&m, &Vector::new(vec![2.0, 8.0]).unwrap()).unwrap();
        assert!((x.get(0) - 1.0).abs() < 1e-14);
        assert!((x.get(1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn solve_spd_residual_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_spd(&mut rng, 5);
            let rhs = Vector::new((0..5).map(|_| rng.random_range(-10.0..10.0)).collect()).unwrap();
            let x = solve_spd(&m, &rhs).unwrap();
            let resid = m.mul_vec(&x).unwrap().sub(&rhs).unwrap().inf_norm();
            assert!(resid <= 1e-9 * rhs.inf_norm().max(1.0), "residual {resid}");
        }
    }

    #[test]
    fn solve_spd_rejects_asymmetric_and_indefinite() {
        let asym = Mat::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_spd(&asym, &Vector::zeros(2).add(&Vector::zeros(2)).unwrap()),
            Err(Error::NotSymmetric { .. })
        ));
        let indef = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_spd(&indef, &Vector::new(vec![1.0, 1.0]).unwrap()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn is_psd_examples() {
        assert!(is_psd(&Mat::diag(&[1.0, 2.0, 3.0]), 1e-12).unwrap());
        // eigenvalues of [[1,2],[2,1]] are 3 and -1
        let indef = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(!is_psd(&indef, 1e-12).unwrap());
        assert!(is_psd(&Mat::zeros(3, 3), 0.0).unwrap());
        assert!(matches!(
            is_psd(&Mat::zeros(2, 3), 1e-12),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn sym_eigenvalues_known_2x2() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        let eig = sym_eigenvalues(&m).unwrap();
        assert!((eig[0] + 1.0).abs() < 1e-10);
        assert!((eig[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_matches_jacobi_top_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let m = random_spd(&mut rng, 4);
            let eig = sym_eigenvalues(&m).unwrap();
            let lam = power_iter_lambda_max(&m, 200).unwrap();
            assert!((lam - eig[3]).abs() <= 1e-6 * eig[3]);
        }
    }

    #[test]
    fn finite_diff_constant_is_zero() {
        let g = finite_diff_grad(|_| 7.5, &[1.0, 2.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn finite_diff_quadratic_norm() {
        let x = [0.3, -1.2, 2.0];
        let g = finite_diff_grad(|v| v.iter().map(|a| a * a).sum(), &x, 1e-5).unwrap();
        for i in 0..3 {
            assert!((g[i] - 2.0 * x[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_diff_general_quadratic() {
        // f(v) = vᵀMv + bᵀv has gradient (M + Mᵀ)v + b
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_mat(&mut rng, 3, 3);
        let b = random_mat(&mut rng, 3, 1);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = |v: &[f64]| {
            let mut quad = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    quad += v[i] * m.get(i, j) * v[j];
                }
            }
            quad + (0..3).map(|i| b.get(i, 0) * v[i]).sum::<f64>()
        };
        let g = finite_diff_grad(f, &x, 1e-5).unwrap();
        let xv = Vector::new(x.clone()).unwrap();
        let expect = m
            .add(&m.transpose())
            .unwrap()
            .mul_vec(&xv)
            .unwrap()
            .add(&b.column(0))
            .unwrap();
        for i in 0..3 {
            let scale = expect.get(i).abs().max(1.0);
            assert!((g[i] - expect.get(i)).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn finite_diff_rejects_non_finite() {
        let err = finite_diff_grad(|v| 1.0 / (v[0] - v[0]), &[1.0], 1e-5).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn psd_factor_handles_zero_and_reconstructs() {
        assert_eq!(psd_factor(&Mat::zeros(3, 3)).unwrap(), Mat::zeros(3, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_spd(&mut rng, 4);
        let l = psd_factor(&m).unwrap();
        let back = l.matmul(&l.transpose()).unwrap();
        assert!(back.sub(&m).unwrap().max_abs() < 1e-10 * m.max_abs());
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(Mat::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::new(0, 1, vec![]).is_err());
        assert!(Mat::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }
}
