//! Named method families with their certificates, default lifts and rates.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    gsw_grad_certificate, ogm_func_certificate, ogmg_grad_certificate, silver_func_certificate,
    FuncCertificate, GradCertificate, Metric,
};
use crate::error::{invalid, Error, Result};
use crate::lift::default_grad_xi;
use crate::methods::{run_composite, run_pogm, run_pogmg, RunTrace};
use crate::problems::ProxProblem;
use crate::schedules::{gsw_schedule, ScheduleSpec, StepsizeMatrix, ThetaSequence, RHO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Silver,
    Gsw,
    Ogm,
    Ogmg,
}

pub const ALGORITHM_NAMES: [&str; 4] = ["silver", "gsw", "ogm", "ogmg"];

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "silver" => Ok(Algorithm::Silver),
            "gsw" => Ok(Algorithm::Gsw),
            "ogm" => Ok(Algorithm::Ogm),
            "ogmg" | "ogm-g" => Ok(Algorithm::Ogmg),
            other => Err(invalid(format!(
                "unknown algorithm '{other}'; valid names: {}",
                ALGORITHM_NAMES.join(", ")
            ))),
        }
    }
}

/// Either kind of certificate.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Func(FuncCertificate),
    Grad(GradCertificate),
}

impl Certificate {
    pub fn metric(&self) -> Metric {
        match self {
            Certificate::Func(_) => Metric::Func,
            Certificate::Grad(_) => Metric::Grad,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Certificate::Func(c) => c.n,
            Certificate::Grad(c) => c.n,
        }
    }
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Silver, Algorithm::Gsw, Algorithm::Ogm, Algorithm::Ogmg];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Silver => "silver",
            Algorithm::Gsw => "gsw",
            Algorithm::Ogm => "ogm",
            Algorithm::Ogmg => "ogmg",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Algorithm::Silver | Algorithm::Ogm => Metric::Func,
            Algorithm::Gsw | Algorithm::Ogmg => Metric::Grad,
        }
    }

    /// Whether the size parameter is a level `k` with `n = 2^k - 1`.
    pub fn uses_level(self) -> bool {
        matches!(self, Algorithm::Silver | Algorithm::Gsw)
    }

    /// Rejects an incompatible metric.
    pub fn check_metric(self, metric: Metric) -> Result<()> {
        if metric != self.metric() {
            return Err(invalid(format!(
                "{self} is certified for the {} metric, not {metric}",
                self.metric()
            )));
        }
        Ok(())
    }

    fn check_size(self, size: usize) -> Result<()> {
        if size < 1 {
            let what = if self.uses_level() { "level k" } else { "iteration count n" };
            return Err(invalid(format!("{what} must be at least 1")));
        }
        if self.uses_level() && size > 20 {
            return Err(invalid("level k above 20 is not supported"));
        }
        Ok(())
    }

    /// Number of steps for the size parameter.
    pub fn steps(self, size: usize) -> Result<usize> {
        self.check_size(size)?;
        Ok(if self.uses_level() { (1usize << size) - 1 } else { size })
    }

    pub fn schedule_spec(self, size: usize) -> Result<ScheduleSpec> {
        self.check_size(size)?;
        Ok(match self {
            Algorithm::Silver => ScheduleSpec::Silver { k: size as u32 },
            Algorithm::Gsw => ScheduleSpec::Gsw { k: size as u32 },
            Algorithm::Ogm => ScheduleSpec::Ogm { n: size },
            Algorithm::Ogmg => ScheduleSpec::Ogmg { n: size },
        })
    }

    pub fn stepsize_matrix(self, size: usize) -> Result<StepsizeMatrix> {
        self.schedule_spec(size)?.stepsize_matrix()
    }

    pub fn certificate(self, size: usize) -> Result<Certificate> {
        self.check_size(size)?;
        Ok(match self {
            Algorithm::Silver => Certificate::Func(silver_func_certificate(size as u32)?),
            Algorithm::Gsw => Certificate::Grad(gsw_grad_certificate(size as u32)?),
            Algorithm::Ogm => Certificate::Func(ogm_func_certificate(size)?),
            Algorithm::Ogmg => Certificate::Grad(ogmg_grad_certificate(size)?),
        })
    }

    /// Default slack weight of the composite lift.
    pub fn default_xi(self, size: usize) -> Result<f64> {
        self.check_size(size)?;
        Ok(match self {
            Algorithm::Silver => 1.0 / SQRT_2,
            Algorithm::Ogm if size == 1 => 1.0 / 3.0,
            Algorithm::Ogm => (5f64.sqrt() - 1.0) / 4.0,
            Algorithm::Gsw | Algorithm::Ogmg => match self.certificate(size)? {
                Certificate::Grad(c) => default_grad_xi(&c),
                Certificate::Func(_) => unreachable!(),
            },
        })
    }

    /// Closed-form composite rate constant (in units of `L`).
    pub fn closed_form_rate(self, size: usize) -> Result<f64> {
        self.check_size(size)?;
        Ok(match self {
            Algorithm::Silver => RHO / (SQRT_2 * (4.0 * RHO.powi(size as i32) - 2.0)),
            Algorithm::Gsw => 2.0 * SQRT_2 / gsw_schedule(size as u32)?.tau(size as u32),
            Algorithm::Ogm if size == 1 => 1.0 / 6.0,
            Algorithm::Ogm => {
                let t = ThetaSequence::new(size)?.last();
                (3.0 + 5f64.sqrt()) / (8.0 * t * t)
            }
            Algorithm::Ogmg if size == 1 => 2.0 / 3.0,
            Algorithm::Ogmg => {
                let t = ThetaSequence::new(size)?.last();
                2.0 * (5f64.sqrt() - 1.0) / (t * t)
            }
        })
    }

    /// Runs the composite extension in its natural form.
    pub fn run(self, p: &ProxProblem, size: usize, x0: &DVector<f64>) -> Result<RunTrace> {
        let mut trace = match self {
            Algorithm::Silver | Algorithm::Gsw => run_composite(p, &self.stepsize_matrix(size)?, x0)?,
            Algorithm::Ogm => run_pogm(p, size, x0)?,
            Algorithm::Ogmg => run_pogmg(p, size, x0)?,
        };
        if self.uses_level() {
            trace.method = format!("proxgd-{self}");
        }
        Ok(trace)
    }
}

/// Both sides of a rate bound on one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    /// `F_n - F_*` or `|g_n + s_n|^2`.
    pub observed: f64,
    /// `c L |x_0 - x_*|^2` or `c L (F_0 - F_n)`.
    pub bound: f64,
}

impl Envelope {
    pub fn excess(&self) -> f64 {
        self.observed - self.bound
    }

    /// `observed / bound`, or `0` when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.observed / self.bound
        } else if self.observed <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn envelope(metric: Metric, constant: f64, trace: &RunTrace, p: &ProxProblem) -> Result<Envelope> {
    let n = trace.n();
    let l = trace.lipschitz;
    match metric {
        Metric::Func => {
            let f_star = p.f_star.ok_or(Error::UnknownOptimum)?;
            let x_star = p.x_star.as_ref().ok_or(Error::UnknownOptimum)?;
            Ok(Envelope {
                observed: trace.objective(n) - f_star,
                bound: constant * l * (&trace.x[0] - x_star).norm_squared(),
            })
        }
        Metric::Grad => Ok(Envelope {
            observed: trace.composite_grad_norm_sq(n),
            bound: constant * l * (trace.objective(0) - trace.objective(n)),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip_and_unknown_lists_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        let err = "nesterov".parse::<Algorithm>().unwrap_err().to_string();
        for name in ALGORITHM_NAMES {
            assert!(err.contains(name));
        }
    }

    #[test]
    fn metric_pairs() {
        assert!(Algorithm::Silver.check_metric(Metric::Grad).is_err());
        assert!(Algorithm::Ogmg.check_metric(Metric::Grad).is_ok());
        assert!(Algorithm::Ogm.certificate(0).is_err());
    }

    #[test]
    fn small_closed_form_constants() {
        // silver k = 1: rho / (sqrt2 (4 rho - 2))
        let r = Algorithm::Silver.closed_form_rate(1).unwrap();
        assert!((r - RHO / (SQRT_2 * (4.0 * RHO - 2.0))).abs() < 1e-15);
        assert!((Algorithm::Ogm.closed_form_rate(1).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((Algorithm::Gsw.closed_form_rate(1).unwrap() - SQRT_2 / 2.0).abs() < 1e-15);
        assert_eq!(Algorithm::Silver.steps(3).unwrap(), 7);
    }
}
