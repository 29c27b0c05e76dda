//! Stepsize schedules and stepsize matrices.
//!
//! A method with `n` steps is described by an upper-triangular `n x n`
//! stepsize matrix. The coefficient `alpha_{k,j}` (the weight on gradient
//! `g_j` in the update producing `x_k`, `0 <= j < k <= n`) is stored at
//! row `j`, column `k - 1`. The diagonal therefore holds `alpha_{k,k-1}`.

use std::f64::consts::SQRT_2;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The silver ratio `1 + sqrt(2)`.
pub const RHO: f64 = 1.0 + SQRT_2;

/// Upper-triangular matrix of stepsizes with a nonzero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct StepsizeMatrix {
    entries: DMatrix<f64>,
}

impl StepsizeMatrix {
    /// Validates and wraps a square upper-triangular matrix.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidSchedule(format!(
                "stepsize matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for r in 0..n {
            for c in 0..n {
                let v = entries[(r, c)];
                if !v.is_finite() {
                    return Err(Error::InvalidSchedule(format!("non-finite entry at ({r}, {c})")));
                }
                if r > c && v != 0.0 {
                    return Err(Error::InvalidSchedule(format!(
                        "entry ({r}, {c}) below the diagonal is nonzero"
                    )));
                }
            }
            if entries[(r, r)] == 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "alpha_{{{},{}}} is zero",
                    r + 1,
                    r
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Plain gradient descent with the given stepsizes.
    pub fn diagonal(steps: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(steps)))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// `alpha_{k,j}` for `1 <= k <= n`, `0 <= j < k`.
    pub fn alpha(&self, k: usize, j: usize) -> f64 {
        debug_assert!(k >= 1 && k <= self.n() && j < k);
        self.entries[(j, k - 1)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n();
        (0..n).all(|r| (r + 1..n).all(|c| self.entries[(r, c)] == 0.0))
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.entries[(i, i)]).collect()
    }

    /// Same method with every stepsize multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_matrix(&self.entries * factor)
    }

    pub fn cumulative(&self) -> CumulativeStepsizeMatrix {
        cumulative(self)
    }
}

/// `H U_n`: entry `(j, i - 1)` is the total weight of `g_j` in `x_0 - x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeStepsizeMatrix {
    entries: DMatrix<f64>,
}

impl CumulativeStepsizeMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Weight of `g_j` in `x_0 - x_i`; zero when `j >= i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == 0 || j >= i {
            0.0
        } else {
            self.entries[(j, i - 1)]
        }
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Explicit inverse, computed by back substitution.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.n();
        self.entries
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .expect("cumulative stepsize matrix has a nonzero diagonal")
    }

    /// Solves `H~ X = B`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.entries
            .solve_upper_triangular(rhs)
            .expect("cumulative stepsize matrix has a nonzero diagonal")
    }

    /// Recovers the stepsize matrix by multiplying with `U_n^{-1}`.
    pub fn to_stepsize(&self) -> Result<StepsizeMatrix> {
        let n = self.n();
        let mut h = self.entries.clone();
        for c in (1..n).rev() {
            for r in 0..n {
                h[(r, c)] -= self.entries[(r, c - 1)];
            }
        }
        StepsizeMatrix::from_matrix(h)
    }
}

/// `U(a_1, .., a_n)`: `a` on the diagonal, ones above it.
pub fn u_matrix(a: &[f64]) -> DMatrix<f64> {
    let n = a.len();
    DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            a[r]
        } else if r < c {
            1.0
        } else {
            0.0
        }
    })
}

pub fn cumulative(h: &StepsizeMatrix) -> CumulativeStepsizeMatrix {
    let n = h.n();
    let mut entries = h.entries.clone();
    for c in 1..n {
        for r in 0..n {
            entries[(r, c)] += entries[(r, c - 1)];
        }
    }
    CumulativeStepsizeMatrix { entries }
}

/// Silver stepsizes `pi^(k)` of length `2^k - 1` via the 2-adic valuation.
pub fn silver_schedule(k: u32) -> Result<Vec<f64>> {
    check_level(k)?;
    let n = (1usize << k) - 1;
    Ok((1..=n)
        .map(|i| 1.0 + RHO.powi(i.trailing_zeros() as i32 - 1))
        .collect())
}

/// Silver stepsizes built by concatenation `[pi, rho^(k-1) + 1, pi]`.
pub fn silver_schedule_recursive(k: u32) -> Result<Vec<f64>> {
    check_level(k)?;
    let mut pi = vec![SQRT_2];
    for level in 1..k {
        let mut next = pi.clone();
        next.push(RHO.powi(level as i32 - 1) + 1.0);
        next.extend_from_slice(&pi);
        pi = next;
    }
    Ok(pi)
}

fn check_level(k: u32) -> Result<()> {
    if k < 1 {
        return Err(invalid("schedule level k must be at least 1"));
    }
    if k > 30 {
        return Err(invalid(format!("schedule level k = {k} is too large")));
    }
    Ok(())
}

/// Gradient-norm schedule `w^(k)` together with its `tau` and `eta` sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct GswSchedule {
    pub k: u32,
    pub steps: Vec<f64>,
    /// `tau_1 ..= tau_k`.
    pub tau: Vec<f64>,
    /// `eta_1 ..= eta_{k-1}`.
    pub eta: Vec<f64>,
}

impl GswSchedule {
    pub fn tau(&self, level: u32) -> f64 {
        self.tau[level as usize - 1]
    }

    pub fn eta(&self, level: u32) -> f64 {
        self.eta[level as usize - 1]
    }
}

pub fn gsw_schedule(k: u32) -> Result<GswSchedule> {
    check_level(k)?;
    let mut tau = vec![4.0];
    let mut eta = Vec::new();
    let mut steps = vec![1.5];
    for level in 1..k {
        let t = tau[level as usize - 1];
        let rk = RHO.powi(level as i32);
        let root = (t * t + 8.0 * rk * t).sqrt();
        let e = 1.0 + (root - t) / 4.0;
        tau.push(0.5 * (t + 4.0 * rk + root));
        eta.push(e);
        steps.push(e);
        steps.extend(silver_schedule(level)?);
    }
    Ok(GswSchedule { k, steps, tau, eta })
}

/// `theta_0 ..= theta_n` for an `n`-step OGM / OGM-G.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSequence {
    values: Vec<f64>,
}

impl ThetaSequence {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(invalid("iteration count n must be at least 1"));
        }
        let mut values = Vec::with_capacity(n + 1);
        values.push(1.0);
        for i in 1..=n {
            let prev: f64 = values[i - 1];
            let c = if i == n { 8.0 } else { 4.0 };
            values.push(0.5 * (1.0 + (1.0 + c * prev * prev).sqrt()));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last(&self) -> f64 {
        self.values[self.n()]
    }

    /// `phi_i` for `1 <= i <= n`, the diagonal of the middle OGM factor.
    pub fn phi(&self, i: usize) -> f64 {
        let n = self.n();
        assert!(i >= 1 && i <= n);
        if i < n {
            1.0 + self.values[i - 1] / (2.0 * self.values[i])
        } else {
            1.0 + self.values[n - 1] / self.values[n]
        }
    }

    pub fn phis(&self) -> Vec<f64> {
        (1..=self.n()).map(|i| self.phi(i)).collect()
    }

    /// Relative residuals of the defining quadratic recurrences.
    pub fn recurrence_residuals(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let a = self.values[i];
                let b = self.values[i + 1];
                let c = if i + 1 == n { 2.0 } else { 1.0 };
                (b * b - b - c * a * a).abs() / (b * b)
            })
            .collect()
    }
}

pub fn theta_sequence(n: usize) -> Result<ThetaSequence> {
    ThetaSequence::new(n)
}

/// OGM stepsize matrix from the forward recursion over rows.
pub fn ogm_stepsize_matrix(n: usize) -> Result<StepsizeMatrix> {
    let theta = ThetaSequence::new(n)?;
    let t = |i: usize| theta.get(i);
    let mut m = DMatrix::zeros(n, n);
    // column i holds alpha_{i+1, .}
    for i in 0..n {
        let ratio = (t(i) - 1.0) / t(i + 1);
        for j in 0..=i {
            m[(j, i)] = if j == i {
                1.0 + (2.0 * t(i) - 1.0) / t(i + 1)
            } else if j + 1 == i {
                ratio * (m[(i - 1, i - 1)] - 1.0)
            } else {
                ratio * m[(j, i - 1)]
            };
        }
    }
    StepsizeMatrix::from_matrix(m)
}

/// OGM-G stepsize matrix; each row is filled from the diagonal leftwards.
pub fn ogmg_stepsize_matrix(n: usize) -> Result<StepsizeMatrix> {
    let theta = ThetaSequence::new(n)?;
    let t = |i: usize| theta.get(i);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0 + (2.0 * t(n - i - 1) - 1.0) / t(n - i);
        for j in (0..i).rev() {
            let ratio = (t(n - j - 1) - 1.0) / t(n - j);
            m[(j, i)] = if j + 1 == i {
                ratio * (m[(i, i)] - 1.0)
            } else {
                ratio * m[(j + 1, i)]
            };
        }
    }
    StepsizeMatrix::from_matrix(m)
}

/// `diag(2 theta_0..2 theta_{n-1}) U(phi_1..phi_n) U(theta_1..theta_n)^{-1}`.
pub fn ogm_factored(n: usize) -> Result<DMatrix<f64>> {
    let theta = ThetaSequence::new(n)?;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| 2.0 * theta.get(i)));
    let up = u_matrix(&theta.phis());
    let ut = u_matrix(&theta.values()[1..]);
    let ut_inv = ut
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| invalid("singular theta factor"))?;
    Ok(d * up * ut_inv)
}

/// `U(theta_n..theta_1)^{-1} U(phi_n..phi_1) diag(2 theta_{n-1}..2 theta_0)`.
pub fn ogmg_factored(n: usize) -> Result<DMatrix<f64>> {
    let theta = ThetaSequence::new(n)?;
    let rev_theta: Vec<f64> = (1..=n).rev().map(|i| theta.get(i)).collect();
    let rev_phi: Vec<f64> = (1..=n).rev().map(|i| theta.phi(i)).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| {
        2.0 * theta.get(n - 1 - i)
    }));
    let ut = u_matrix(&rev_theta);
    let up = u_matrix(&rev_phi);
    let ut_inv = ut
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| invalid("singular theta factor"))?;
    Ok(ut_inv * up * d)
}

/// Named families of schedules.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Silver { k: u32 },
    Gsw { k: u32 },
    Ogm { n: usize },
    Ogmg { n: usize },
    ConstantGd { alpha: f64, n: usize },
    Custom(StepsizeMatrix),
}

impl ScheduleSpec {
    pub fn n(&self) -> usize {
        match self {
            ScheduleSpec::Silver { k } | ScheduleSpec::Gsw { k } => (1usize << k) - 1,
            ScheduleSpec::Ogm { n } | ScheduleSpec::Ogmg { n } => *n,
            ScheduleSpec::ConstantGd { n, .. } => *n,
            ScheduleSpec::Custom(h) => h.n(),
        }
    }

    pub fn stepsize_matrix(&self) -> Result<StepsizeMatrix> {
        match self {
            ScheduleSpec::Silver { k } => StepsizeMatrix::diagonal(&silver_schedule(*k)?),
            ScheduleSpec::Gsw { k } => StepsizeMatrix::diagonal(&gsw_schedule(*k)?.steps),
            ScheduleSpec::Ogm { n } => ogm_stepsize_matrix(*n),
            ScheduleSpec::Ogmg { n } => ogmg_stepsize_matrix(*n),
            ScheduleSpec::ConstantGd { alpha, n } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return Err(invalid("constant stepsize must be positive"));
                }
                if *n < 1 {
                    return Err(invalid("iteration count n must be at least 1"));
                }
                StepsizeMatrix::diagonal(&vec![*alpha; *n])
            }
            ScheduleSpec::Custom(h) => Ok(h.clone()),
        }
    }
}

/// On-disk form of a custom schedule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScheduleFile {
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl ScheduleFile {
    pub fn to_stepsize_matrix(&self) -> Result<StepsizeMatrix> {
        if self.kind != "custom" {
            return Err(Error::Parse(format!(
                "schedule kind must be \"custom\", got {:?}",
                self.kind
            )));
        }
        match (&self.diagonal, &self.matrix) {
            (Some(d), None) => {
                if d.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: d.len() });
                }
                StepsizeMatrix::diagonal(d)
            }
            (None, Some(rows)) => {
                if rows.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: rows.len() });
                }
                for row in rows {
                    if row.len() != self.n {
                        return Err(Error::DimensionMismatch { expected: self.n, got: row.len() });
                    }
                }
                StepsizeMatrix::from_matrix(DMatrix::from_fn(self.n, self.n, |r, c| rows[r][c]))
            }
            _ => Err(Error::Parse(
                "schedule file needs exactly one of \"diagonal\" or \"matrix\"".into(),
            )),
        }
    }

    pub fn from_stepsize_matrix(h: &StepsizeMatrix) -> Self {
        let n = h.n();
        if h.is_diagonal() {
            ScheduleFile { kind: "custom".into(), n, diagonal: Some(h.diagonal_entries()), matrix: None }
        } else {
            let rows = (0..n).map(|r| (0..n).map(|c| h.as_matrix()[(r, c)]).collect()).collect();
            ScheduleFile { kind: "custom".into(), n, diagonal: None, matrix: Some(rows) }
        }
    }
}

pub fn load_schedule(path: impl AsRef<Path>) -> Result<StepsizeMatrix> {
    let text = std::fs::read_to_string(path)?;
    let file: ScheduleFile = serde_json::from_str(&text)?;
    file.to_stepsize_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn silver_small_levels() {
        assert_eq!(silver_schedule(1).unwrap(), vec![SQRT_2]);
        let s2 = silver_schedule(2).unwrap();
        assert_relative_eq!(s2[0], SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(s2[1], 2.0, epsilon = 1e-15);
        assert_relative_eq!(s2[2], SQRT_2, epsilon = 1e-15);
        let s3 = silver_schedule(3).unwrap();
        let expect = [SQRT_2, 2.0, SQRT_2, 1.0 + RHO, SQRT_2, 2.0, SQRT_2];
        for (a, b) in s3.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn silver_closed_form_matches_recursion() {
        for k in 1..=7 {
            let a = silver_schedule(k).unwrap();
            let b = silver_schedule_recursive(k).unwrap();
            assert_eq!(a.len(), (1 << k) - 1);
            let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-14 * scale, "k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn level_zero_is_rejected() {
        assert!(matches!(silver_schedule(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(gsw_schedule(0), Err(Error::InvalidArgument(_))));
        assert!(theta_sequence(0).is_err());
    }

    #[test]
    fn gsw_first_levels() {
        let g1 = gsw_schedule(1).unwrap();
        assert_eq!(g1.steps, vec![1.5]);
        assert_eq!(g1.tau(1), 4.0);

        let g2 = gsw_schedule(2).unwrap();
        let root = (16.0 + 32.0 * RHO).sqrt();
        assert_relative_eq!(g2.tau(2), 0.5 * (4.0 + 4.0 * RHO + root), epsilon = 1e-14);
        let eta1 = 1.0 + (root - 4.0) / 4.0;
        assert_relative_eq!(g2.eta(1), eta1, epsilon = 1e-14);
        assert_eq!(g2.steps.len(), 3);
        assert_relative_eq!(g2.steps[0], 1.5);
        assert_relative_eq!(g2.steps[1], eta1, epsilon = 1e-14);
        assert_relative_eq!(g2.steps[2], SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn gsw_eta_identity() {
        let g = gsw_schedule(9).unwrap();
        for k in 1..=8u32 {
            let rk = RHO.powi(k as i32);
            let alt = 1.0 + rk * (1.0 - 2.0 * rk / g.tau(k + 1));
            assert!((g.eta(k) - alt).abs() <= 1e-12 * g.eta(k).abs(), "k={k}");
        }
        assert_eq!(g.steps.len(), (1 << 9) - 1);
    }

    #[test]
    fn theta_small_and_asymptotic() {
        let t1 = theta_sequence(1).unwrap();
        assert_eq!(t1.values(), &[1.0, 2.0]);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let t2 = theta_sequence(2).unwrap();
        assert_relative_eq!(t2.get(1), phi, epsilon = 1e-15);
        assert_relative_eq!(t2.get(2), (1.0 + (1.0 + 8.0 * phi * phi).sqrt()) / 2.0, epsilon = 1e-15);
        let t = theta_sequence(200).unwrap();
        let ratio = t.last().powi(2) / (200.0f64 * 200.0 / 2.0);
        assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
        for n in [1, 2, 5, 64, 200] {
            let t = theta_sequence(n).unwrap();
            assert!(t.recurrence_residuals().iter().all(|r| *r < 1e-12));
        }
    }

    #[test]
    fn ogm_single_step() {
        let h = ogm_stepsize_matrix(1).unwrap();
        assert_relative_eq!(h.alpha(1, 0), 1.5, epsilon = 1e-15);
        let g = ogmg_stepsize_matrix(1).unwrap();
        assert_relative_eq!(g.alpha(1, 0), 1.5, epsilon = 1e-15);
    }

    // Direct evaluation in one-based indexing with an associative map, kept
    // separate from the column-major fill used by the constructors.
    fn ogm_by_hand(n: usize) -> std::collections::HashMap<(usize, usize), f64> {
        let t = theta_sequence(n).unwrap();
        let mut a = std::collections::HashMap::new();
        for i in 0..n {
            let th = |m: usize| t.get(m);
            a.insert((i + 1, i), 1.0 + (2.0 * th(i) - 1.0) / th(i + 1));
            if i >= 1 {
                let prev = a[&(i, i - 1)];
                a.insert((i + 1, i - 1), (th(i) - 1.0) / th(i + 1) * (prev - 1.0));
            }
            for j in 0..i.saturating_sub(1) {
                let prev = a[&(i, j)];
                a.insert((i + 1, j), (th(i) - 1.0) / th(i + 1) * prev);
            }
        }
        a
    }

    fn ogmg_by_hand(n: usize) -> std::collections::HashMap<(usize, usize), f64> {
        let t = theta_sequence(n).unwrap();
        let th = |m: usize| t.get(m);
        let mut a = std::collections::HashMap::new();
        for i in 0..n {
            a.insert((i + 1, i), 1.0 + (2.0 * th(n - i - 1) - 1.0) / th(n - i));
            if i >= 1 {
                let j = i - 1;
                let d = a[&(i + 1, i)];
                a.insert((i + 1, j), (th(n - j - 1) - 1.0) / th(n - j) * (d - 1.0));
            }
            for j in (0..i.saturating_sub(1)).rev() {
                let right = a[&(i + 1, j + 1)];
                a.insert((i + 1, j), (th(n - j - 1) - 1.0) / th(n - j) * right);
            }
        }
        a
    }

    #[test]
    fn ogm_and_ogmg_match_direct_recursion() {
        for n in [2, 3, 5] {
            let h = ogm_stepsize_matrix(n).unwrap();
            for ((k, j), v) in ogm_by_hand(n) {
                assert_relative_eq!(h.alpha(k, j), v, epsilon = 1e-14);
            }
            let g = ogmg_stepsize_matrix(n).unwrap();
            for ((k, j), v) in ogmg_by_hand(n) {
                assert_relative_eq!(g.alpha(k, j), v, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn factorizations_hold() {
        for n in 1..=64 {
            let h = ogm_stepsize_matrix(n).unwrap();
            let f = ogm_factored(n).unwrap();
            let scale = h.as_matrix().abs().max();
            assert!(max_abs_diff(h.as_matrix(), &f) <= 1e-10 * scale, "ogm n={n}");

            let g = ogmg_stepsize_matrix(n).unwrap();
            let f = ogmg_factored(n).unwrap();
            let scale = g.as_matrix().abs().max();
            assert!(max_abs_diff(g.as_matrix(), &f) <= 1e-10 * scale, "ogmg n={n}");
        }
    }

    #[test]
    fn u_matrix_shape_and_inverse() {
        let u = u_matrix(&[1.0, 1.0, 1.0]);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(u[(r, c)], if r <= c { 1.0 } else { 0.0 });
            }
        }
        let u = u_matrix(&[2.0, -0.5, 3.0, 1.25]);
        let inv = u.clone().try_inverse().unwrap();
        assert!(max_abs_diff(&(u * inv), &DMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn cumulative_of_constant_gd() {
        let h = ScheduleSpec::ConstantGd { alpha: 0.7, n: 4 }.stepsize_matrix().unwrap();
        let c = h.cumulative();
        for j in 0..4 {
            for i in 1..=4 {
                let expect = if j < i { 0.7 } else { 0.0 };
                assert_relative_eq!(c.weight(i, j), expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn cumulative_of_diagonal_and_roundtrip() {
        let steps = [1.0, 2.5, 0.3];
        let h = StepsizeMatrix::diagonal(&steps).unwrap();
        let c = h.cumulative();
        for j in 0..3 {
            for col in 0..3 {
                let expect = if col >= j { steps[j] } else { 0.0 };
                assert_eq!(c.as_matrix()[(j, col)], expect);
            }
        }
        let h = ogm_stepsize_matrix(6).unwrap();
        let back = h.cumulative().to_stepsize().unwrap();
        assert!(max_abs_diff(back.as_matrix(), h.as_matrix()) < 1e-14);
        let prod = h.as_matrix() * u_matrix(&[1.0; 6]);
        assert_eq!(&prod, h.cumulative().as_matrix());
    }

    #[test]
    fn cumulative_ogm_two_steps_by_hand() {
        let h = ogm_stepsize_matrix(2).unwrap();
        let c = h.cumulative();
        assert_eq!(c.weight(1, 0), h.alpha(1, 0));
        assert_eq!(c.weight(2, 0), h.alpha(1, 0) + h.alpha(2, 0));
        assert_eq!(c.weight(2, 1), h.alpha(2, 1));
    }

    #[test]
    fn stepsize_matrix_validation() {
        let mut m = DMatrix::identity(3, 3);
        m[(2, 0)] = 1.0;
        assert!(StepsizeMatrix::from_matrix(m).is_err());
        let mut m = DMatrix::identity(3, 3);
        m[(1, 1)] = 0.0;
        assert!(StepsizeMatrix::from_matrix(m).is_err());
        assert!(ScheduleSpec::ConstantGd { alpha: 0.0, n: 3 }.stepsize_matrix().is_err());
    }

    #[test]
    fn every_named_schedule_is_nonredundant() {
        let mut specs = vec![];
        for k in 1..=7 {
            specs.push(ScheduleSpec::Silver { k });
            specs.push(ScheduleSpec::Gsw { k });
        }
        for n in [1, 2, 7, 31, 127] {
            specs.push(ScheduleSpec::Ogm { n });
            specs.push(ScheduleSpec::Ogmg { n });
        }
        for s in specs {
            let h = s.stepsize_matrix().unwrap();
            assert_eq!(h.n(), s.n());
            assert!(h.diagonal_entries().iter().all(|d| *d != 0.0));
        }
    }

    #[test]
    fn schedule_file_forms() {
        let d: ScheduleFile =
            serde_json::from_str(r#"{"kind":"custom","n":2,"diagonal":[1.0,1.5]}"#).unwrap();
        assert_eq!(d.to_stepsize_matrix().unwrap().diagonal_entries(), vec![1.0, 1.5]);
        let m: ScheduleFile = serde_json::from_str(
            r#"{"kind":"custom","n":2,"matrix":[[1.0,0.2],[0.0,1.5]]}"#,
        )
        .unwrap();
        let h = m.to_stepsize_matrix().unwrap();
        assert_eq!(h.alpha(2, 0), 0.2);
        assert_eq!(ScheduleFile::from_stepsize_matrix(&h), m);
        let bad: ScheduleFile =
            serde_json::from_str(r#"{"kind":"custom","n":3,"diagonal":[1.0]}"#).unwrap();
        assert!(bad.to_stepsize_matrix().is_err());
    }
}
