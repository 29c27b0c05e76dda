//! Runners for fixed-step methods on smooth and composite problems.
//!
//! All runners take stepsizes in units of `1/L`: the effective coefficient of
//! a gradient is `alpha / L`, and proximal steps use `alpha / L` as well.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::problems::ProxProblem;
use crate::report::sig17;
use crate::schedules::{StepsizeMatrix, ThetaSequence};

/// Iterates, gradients and subgradients produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: String,
    pub lipschitz: f64,
    /// `x_0 ..= x_n`.
    pub x: Vec<DVector<f64>>,
    /// `grad f(x_0) ..= grad f(x_n)`.
    pub g: Vec<DVector<f64>>,
    /// `s_1 ..= s_n` with `s_i` in the subdifferential of `h` at `x_i`.
    pub s: Vec<DVector<f64>>,
    pub f: Vec<f64>,
    pub h: Vec<f64>,
}

impl RunTrace {
    fn start(method: &str, p: &ProxProblem, x0: &DVector<f64>) -> Result<Self> {
        if x0.len() != p.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: x0.len() });
        }
        let mut t = Self {
            method: method.to_string(),
            lipschitz: p.lipschitz(),
            x: Vec::new(),
            g: Vec::new(),
            s: Vec::new(),
            f: Vec::new(),
            h: Vec::new(),
        };
        t.push_point(p, x0.clone())?;
        Ok(t)
    }

    fn push_point(&mut self, p: &ProxProblem, x: DVector<f64>) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::OracleFailure(format!(
                "non-finite iterate x_{} in {}",
                self.x.len(),
                self.method
            )));
        }
        let g = p.grad(&x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::OracleFailure(format!("non-finite gradient at x_{}", self.x.len())));
        }
        self.f.push(p.f(&x));
        self.h.push(p.h(&x));
        self.g.push(g);
        self.x.push(x);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    /// `s_i`, with `s_0 = 0`.
    pub fn subgrad(&self, i: usize) -> DVector<f64> {
        if i == 0 {
            DVector::zeros(self.x[0].len())
        } else {
            self.s[i - 1].clone()
        }
    }

    pub fn objective(&self, i: usize) -> f64 {
        self.f[i] + self.h[i]
    }

    /// `F(x_i) - F_*` for every iterate.
    pub fn gaps(&self, f_star: f64) -> Vec<f64> {
        (0..=self.n()).map(|i| self.objective(i) - f_star).collect()
    }

    /// `|g_i + s_i|^2`, the squared composite gradient norm.
    pub fn composite_grad_norm_sq(&self, i: usize) -> f64 {
        (&self.g[i] + self.subgrad(i)).norm_squared()
    }

    /// Largest violation of the composite update
    /// `x_k = x_{k-1} - sum_j alpha_{k,j} / L (g_j + s_{j+1})`,
    /// relative to the size of the iterates.
    pub fn update_residual(&self, h: &StepsizeMatrix) -> Result<f64> {
        if h.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: h.n(), got: self.n() });
        }
        let l = self.lipschitz;
        let mut worst: f64 = 0.0;
        for k in 1..=self.n() {
            let mut step = &self.x[k - 1] - &self.x[k];
            for j in 0..k {
                step -= (&self.g[j] + self.subgrad(j + 1)) * (h.alpha(k, j) / l);
            }
            let scale = self.x[k].norm().max(self.x[k - 1].norm()).max(1.0);
            worst = worst.max(step.norm() / scale);
        }
        Ok(worst)
    }

    pub fn summary(&self, f_star: Option<f64>, x_star: Option<&DVector<f64>>) -> TraceSummary {
        let n = self.n();
        TraceSummary {
            method: self.method.clone(),
            n,
            lipschitz: self.lipschitz,
            f_star,
            objective: (0..=n).map(|i| self.objective(i)).collect(),
            gap: f_star.map(|fs| self.gaps(fs)),
            grad_norm_sq: (0..=n).map(|i| self.composite_grad_norm_sq(i)).collect(),
            distance: x_star.map(|xs| self.x.iter().map(|x| (x - xs).norm()).collect()),
        }
    }

    /// One row per iterate: `k,f,h,F,gap,grad_norm_sq`.
    pub fn to_csv(&self, f_star: Option<f64>) -> String {
        let mut out = String::from("k,f,h,F,gap,grad_norm_sq\n");
        for i in 0..=self.n() {
            let gap = f_star.map(|fs| sig17::format(self.objective(i) - fs)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i,
                sig17::format(self.f[i]),
                sig17::format(self.h[i]),
                sig17::format(self.objective(i)),
                gap,
                sig17::format(self.composite_grad_norm_sq(i)),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub method: String,
    pub n: usize,
    #[serde(serialize_with = "sig17::scalar")]
    pub lipschitz: f64,
    #[serde(serialize_with = "sig17::opt_scalar")]
    pub f_star: Option<f64>,
    #[serde(serialize_with = "sig17::vec")]
    pub objective: Vec<f64>,
    #[serde(serialize_with = "sig17::opt_vec")]
    pub gap: Option<Vec<f64>>,
    #[serde(serialize_with = "sig17::vec")]
    pub grad_norm_sq: Vec<f64>,
    /// `|x_k - x_*|`.
    #[serde(serialize_with = "sig17::opt_vec")]
    pub distance: Option<Vec<f64>>,
}

fn checked_prox(p: &ProxProblem, step: f64, z: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    let x = p.prox(step, z);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::OracleFailure(format!("prox returned a non-finite point at step {k}")));
    }
    Ok(x)
}

/// `x_k = x_{k-1} - sum_j alpha_{k,j} / L g_j`; requires `h = 0`.
pub fn run_unconstrained(p: &ProxProblem, h: &StepsizeMatrix, x0: &DVector<f64>) -> Result<RunTrace> {
    if !p.prox.is_zero() {
        return Err(invalid("unconstrained runner needs a problem with h = 0"));
    }
    let l = p.lipschitz();
    let mut t = RunTrace::start("unconstrained", p, x0)?;
    for k in 1..=h.n() {
        let mut x = t.x[k - 1].clone();
        for j in 0..k {
            x -= &t.g[j] * (h.alpha(k, j) / l);
        }
        t.s.push(DVector::zeros(x.len()));
        t.push_point(p, x)?;
    }
    Ok(t)
}

/// Composite extension of a stepsize matrix: every update ends in a prox
/// step with parameter `alpha_{k,k-1} / L`.
pub fn run_composite(p: &ProxProblem, h: &StepsizeMatrix, x0: &DVector<f64>) -> Result<RunTrace> {
    let l = p.lipschitz();
    let mut t = RunTrace::start("composite", p, x0)?;
    for k in 1..=h.n() {
        let mut base = t.x[k - 1].clone();
        for j in 0..k - 1 {
            base -= (&t.g[j] + &t.s[j]) * (h.alpha(k, j) / l);
        }
        let diag = h.alpha(k, k - 1) / l;
        let z = &base - &t.g[k - 1] * diag;
        let x = checked_prox(p, diag, &z, k)?;
        // s_k from the prox optimality condition
        let s = (&z - &x) / diag;
        t.s.push(s);
        t.push_point(p, x)?;
    }
    Ok(t)
}

enum Momentum {
    Ogm,
    OgmG,
}

fn run_momentum(p: &ProxProblem, n: usize, x0: &DVector<f64>, kind: Momentum) -> Result<RunTrace> {
    let theta = ThetaSequence::new(n)?;
    let t = |i: usize| theta.get(i);
    let h = match kind {
        Momentum::Ogm => crate::schedules::ogm_stepsize_matrix(n)?,
        Momentum::OgmG => crate::schedules::ogmg_stepsize_matrix(n)?,
    };
    let l = p.lipschitz();
    let name = match kind {
        Momentum::Ogm => "pogm",
        Momentum::OgmG => "pogmg",
    };
    let mut tr = RunTrace::start(name, p, x0)?;
    let mut y = x0.clone();
    let mut z = x0.clone();
    for k in 0..n {
        let x = &tr.x[k];
        let y_next = x - &tr.g[k] / l;
        let (c, d) = match kind {
            Momentum::Ogm => ((t(k) - 1.0) / t(k + 1), t(k) / t(k + 1)),
            Momentum::OgmG => {
                let a = t(n - k);
                let b = t(n - k - 1);
                (
                    (a - 1.0) * (2.0 * b - 1.0) / (a * (2.0 * a - 1.0)),
                    (2.0 * b - 1.0) / (2.0 * a - 1.0),
                )
            }
        };
        let mut momentum = &y_next - &y;
        if k > 0 {
            momentum += (&z - x) / h.alpha(k, k - 1);
        }
        let z_next = &y_next + momentum * c + (&y_next - x) * d;
        let step = h.alpha(k + 1, k) / l;
        let x_next = checked_prox(p, step, &z_next, k + 1)?;
        tr.s.push((&z_next - &x_next) / step);
        tr.push_point(p, x_next)?;
        y = y_next;
        z = z_next;
    }
    Ok(tr)
}

/// Proximal optimized gradient method (momentum form).
pub fn run_pogm(p: &ProxProblem, n: usize, x0: &DVector<f64>) -> Result<RunTrace> {
    run_momentum(p, n, x0, Momentum::Ogm)
}

/// Proximal OGM-G (momentum form) for small composite gradients.
pub fn run_pogmg(p: &ProxProblem, n: usize, x0: &DVector<f64>) -> Result<RunTrace> {
    run_momentum(p, n, x0, Momentum::OgmG)
}

/// FISTA with step `1/L`; `s_k` comes from the prox residual at `y_{k-1}`.
pub fn run_fista(p: &ProxProblem, n: usize, x0: &DVector<f64>) -> Result<RunTrace> {
    if n < 1 {
        return Err(invalid("iteration count n must be at least 1"));
    }
    let l = p.lipschitz();
    let mut tr = RunTrace::start("fista", p, x0)?;
    let mut y = x0.clone();
    let mut t = 1.0f64;
    for k in 1..=n {
        let gy = p.grad(&y);
        let z = &y - &gy / l;
        let x = checked_prox(p, 1.0 / l, &z, k)?;
        tr.s.push((&z - &x) * l);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x + (&x - &tr.x[k - 1]) * ((t - 1.0) / t_next);
        t = t_next;
        tr.push_point(p, x)?;
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{ProblemKind, ProblemSpec, ProxPart, SmoothPart};
    use crate::schedules::{ogm_stepsize_matrix, ogmg_stepsize_matrix, silver_schedule};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scalar_quadratic(curv: f64) -> ProxProblem {
        let a = DMatrix::from_element(1, 1, curv.sqrt());
        let b = DVector::zeros(1);
        ProxProblem::new(SmoothPart::LeastSquares { a, b }, ProxPart::Zero).unwrap()
    }

    #[test]
    fn unit_step_solves_half_square() {
        let p = scalar_quadratic(1.0);
        let h = StepsizeMatrix::diagonal(&[1.0, 1.0, 1.0]).unwrap();
        let tr = run_unconstrained(&p, &h, &DVector::from_element(1, 3.0)).unwrap();
        assert_eq!(tr.x[1][0], 0.0);
        assert_eq!(tr.x[3][0], 0.0);
    }

    #[test]
    fn silver_on_scalar_quadratic_is_product() {
        let p = scalar_quadratic(1.0);
        let steps = silver_schedule(2).unwrap();
        let h = StepsizeMatrix::diagonal(&steps).unwrap();
        let tr = run_unconstrained(&p, &h, &DVector::from_element(1, 1.0)).unwrap();
        let expect: f64 = steps.iter().map(|a| 1.0 - a).product();
        assert_relative_eq!(tr.x[3][0], expect, max_relative = 1e-14);
    }

    #[test]
    fn ogm_quadratic_meets_rate() {
        // f(x) = 1/2 x^2 with L = 1, x_* = 0
        let p = scalar_quadratic(1.0);
        let h = ogm_stepsize_matrix(2).unwrap();
        let tr = run_unconstrained(&p, &h, &DVector::from_element(1, 1.0)).unwrap();
        let theta = ThetaSequence::new(2).unwrap();
        let rate = 1.0 / (2.0 * theta.last() * theta.last());
        assert!(tr.f[2] <= rate + 1e-15);
    }

    #[test]
    fn composite_with_zero_h_matches_unconstrained() {
        let spec = ProblemSpec::new(ProblemKind::SmoothQuadratic, 12, 6, 3);
        let p = spec.build().unwrap();
        let x0 = spec.starting_point(6);
        for h in [ogm_stepsize_matrix(5).unwrap(), ogmg_stepsize_matrix(4).unwrap()] {
            let a = run_unconstrained(&p, &h, &x0).unwrap();
            let b = run_composite(&p, &h, &x0).unwrap();
            for i in 0..=h.n() {
                assert!((&a.x[i] - &b.x[i]).norm() <= 1e-12 * a.x[i].norm().max(1.0));
            }
        }
    }

    #[test]
    fn momentum_forms_match_matrix_forms() {
        for kind in [ProblemKind::Lasso, ProblemKind::BoxQp] {
            let spec = ProblemSpec::new(kind, 15, 8, 7);
            let p = spec.build().unwrap();
            let x0 = spec.starting_point(8);
            for n in [1, 2, 5, 9] {
                let a = run_pogm(&p, n, &x0).unwrap();
                let b = run_composite(&p, &ogm_stepsize_matrix(n).unwrap(), &x0).unwrap();
                let c = run_pogmg(&p, n, &x0).unwrap();
                let d = run_composite(&p, &ogmg_stepsize_matrix(n).unwrap(), &x0).unwrap();
                for i in 0..=n {
                    let s = a.x[i].norm().max(1.0);
                    assert!((&a.x[i] - &b.x[i]).norm() <= 1e-8 * s, "pogm n={n} i={i}");
                    assert!((&c.x[i] - &d.x[i]).norm() <= 1e-8 * s, "pogmg n={n} i={i}");
                }
                assert!(a.update_residual(&ogm_stepsize_matrix(n).unwrap()).unwrap() < 1e-10);
                assert!(c.update_residual(&ogmg_stepsize_matrix(n).unwrap()).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn stationary_start_stays_put() {
        let mut spec = ProblemSpec::new(ProblemKind::Lasso, 6, 6, 1);
        spec.identity = true;
        let p = spec.build().unwrap();
        let xs = p.x_star.clone().unwrap();
        for tr in [
            run_pogm(&p, 6, &xs).unwrap(),
            run_pogmg(&p, 6, &xs).unwrap(),
            run_composite(&p, &StepsizeMatrix::diagonal(&silver_schedule(2).unwrap()).unwrap(), &xs)
                .unwrap(),
        ] {
            for x in &tr.x {
                assert!((x - &xs).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn subgradients_satisfy_subgradient_inequality() {
        let spec = ProblemSpec::new(ProblemKind::Lasso, 10, 5, 2);
        let p = spec.build().unwrap();
        let tr = run_pogm(&p, 6, &spec.starting_point(5)).unwrap();
        for i in 1..=6 {
            let s = tr.subgrad(i);
            for j in 0..=6 {
                let slack = tr.h[j] - tr.h[i] - s.dot(&(&tr.x[j] - &tr.x[i]));
                assert!(slack >= -1e-10);
            }
        }
    }

    #[test]
    fn fista_decreases_gap_and_csv_shape() {
        let spec = ProblemSpec::new(ProblemKind::Lasso, 20, 10, 4);
        let p = crate::problems::make_problem(&spec).unwrap();
        let tr = run_fista(&p, 30, &spec.starting_point(10)).unwrap();
        let gaps = tr.gaps(p.f_star.unwrap());
        assert!(gaps[30] < gaps[0]);
        let csv = tr.to_csv(p.f_star);
        assert_eq!(csv.lines().count(), 32);
        assert!(csv.starts_with("k,f,h,F,gap,grad_norm_sq"));
    }

    #[test]
    fn rejects_nonzero_h_and_bad_start() {
        let spec = ProblemSpec::new(ProblemKind::Lasso, 5, 3, 0);
        let p = spec.build().unwrap();
        let h = StepsizeMatrix::diagonal(&[1.0]).unwrap();
        assert!(run_unconstrained(&p, &h, &DVector::zeros(3)).is_err());
        assert!(run_composite(&p, &h, &DVector::zeros(4)).is_err());
        let blow = StepsizeMatrix::diagonal(&[1e308, 1e308]).unwrap();
        assert!(matches!(
            run_composite(&p, &blow, &spec.starting_point(3)),
            Err(Error::OracleFailure(_))
        ));
    }
}
