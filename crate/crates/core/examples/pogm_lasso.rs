//! Proximal OGM on lasso against FISTA with the same budget.

use peplift::methods::{run_fista, run_pogm};
use peplift::problems::{make_problem, ProblemKind, ProblemSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 40;
    let mut spec = ProblemSpec::new(ProblemKind::Lasso, 80, 40, 11);
    spec.tau = 0.05;
    let p = make_problem(&spec)?;
    let x0 = spec.starting_point(p.dim());
    let f_star = p.f_star.unwrap();

    let pogm = run_pogm(&p, n, &x0)?.gaps(f_star);
    let fista = run_fista(&p, n, &x0)?.gaps(f_star);
    println!("{:>4} {:>14} {:>14}", "k", "pogm", "fista");
    for k in (0..=n).step_by(5) {
        println!("{k:>4} {:>14.6e} {:>14.6e}", pogm[k], fista[k]);
    }
    Ok(())
}
