//! Gradient-norm certificate for the GSW schedule and its composite lift.

use peplift::certificates::{gsw_grad_certificate, verify_grad_identity};
use peplift::lift::{check_grad_feasibility, lift_grad};
use peplift::schedules::{gsw_schedule, StepsizeMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = 3;
    let sched = gsw_schedule(k)?;
    println!("steps: {:?}", sched.steps);

    let h = StepsizeMatrix::diagonal(&sched.steps)?;
    let cert = gsw_grad_certificate(k)?;
    let report = verify_grad_identity(&h, &cert)?;
    println!("unconstrained rate {:.12}  identity residual {:.2e}", cert.unconstrained_rate(), report.residuals.max_relative());

    let lift = lift_grad(&h, &cert)?;
    let feas = check_grad_feasibility(&lift);
    println!("xi' = {:.12}  composite rate {:.12}", lift.xi, lift.rate());
    println!("corner {:.6}  min mu {:.3e}  min eig {:.3e}  pass {}", feas.corner, feas.min_mu, feas.min_eig_s, feas.pass);
    Ok(())
}
