//! Lifts the silver certificate to the composite setting and checks feasibility.

use peplift::catalog::{Algorithm, Certificate};
use peplift::lift::{check_func_feasibility, lift_func, verify_composite_func_identity, XiChoice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let algo = Algorithm::Silver;
    for k in 1..=6 {
        let h = algo.stepsize_matrix(k)?;
        let Certificate::Func(cert) = algo.certificate(k)? else { unreachable!() };
        let xi = algo.default_xi(k)?;
        let lift = lift_func(&h, &cert, XiChoice::Value(xi))?;
        let feas = check_func_feasibility(&lift, xi)?;
        let ident = verify_composite_func_identity(&h, &cert, &lift)?;
        println!(
            "k = {k}  n = {:3}  rate = {:.6e}  min mu = {:.3e}  min eig S = {:.3e}  identity {:.1e}  {}",
            lift.n,
            lift.rate(),
            feas.min_mu,
            feas.min_eig_s,
            ident.residuals.max_relative(),
            if feas.pass && ident.pass { "feasible" } else { "infeasible" }
        );
    }
    Ok(())
}
