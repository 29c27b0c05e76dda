//! Checks the function-value certificate of OGM over a range of horizons.

use peplift::certificates::{ogm_func_certificate, verify_func_identity};
use peplift::schedules::ogm_stepsize_matrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>4} {:>12} {:>12} {:>12} {:>20}", "n", "quad", "lin_f", "lin_h", "rate");
    for n in [1, 2, 4, 8, 16, 32, 64] {
        let h = ogm_stepsize_matrix(n)?;
        let cert = ogm_func_certificate(n)?;
        let report = verify_func_identity(&h, &cert)?;
        let r = report.residuals;
        println!(
            "{n:>4} {:>12.3e} {:>12.3e} {:>12.3e} {:>20.17}  {}",
            r.quad,
            r.lin_f,
            r.lin_h,
            cert.unconstrained_rate(),
            if report.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
