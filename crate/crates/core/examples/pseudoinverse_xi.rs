//! Compares the default xi with the smallest value allowed by the
//! pseudoinverse bound.

use peplift::catalog::{Algorithm, Certificate};
use peplift::lift::{check_func_feasibility, lift_func, XiChoice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for algo in [Algorithm::Silver, Algorithm::Ogm] {
        let sizes: &[usize] = if algo.uses_level() { &[1, 2, 3, 4, 5] } else { &[1, 2, 5, 10, 20] };
        for &size in sizes {
            let h = algo.stepsize_matrix(size)?;
            let Certificate::Func(cert) = algo.certificate(size)? else { unreachable!() };
            let lift = lift_func(&h, &cert, XiChoice::Pseudoinverse)?;
            let xi0 = algo.default_xi(size)?;
            let psd = check_func_feasibility(&lift, lift.xi)?.psd_ok;
            println!(
                "{algo:6} size {size:2}  default xi {xi0:.6}  pseudo xi {:.6}  rate {:.6e} -> {:.6e}  psd {psd}",
                lift.pseudo_xi,
                algo.closed_form_rate(size)?,
                lift.rate()
            );
        }
    }
    Ok(())
}
