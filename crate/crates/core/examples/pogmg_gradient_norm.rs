//! Proximal OGM-G drives the composite gradient mapping down.

use peplift::catalog::{envelope, Algorithm};
use peplift::problems::{make_problem, ProblemKind, ProblemSpec};
use peplift::report::{lift_cell, XiMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ProblemSpec::new(ProblemKind::BoxQp, 40, 20, 3);
    let p = make_problem(&spec)?;
    let x0 = spec.starting_point(p.dim());

    for n in [5, 10, 20, 40] {
        let rate = lift_cell(Algorithm::Ogmg, n, XiMode::Default)?.rate;
        let trace = Algorithm::Ogmg.run(&p, n, &x0)?;
        let env = envelope(Algorithm::Ogmg.metric(), rate, &trace, &p)?;
        println!(
            "n = {n:2}  |g_n + s_n|^2 = {:.4e}  bound = {:.4e}  rate = {rate:.6}",
            env.observed, env.bound
        );
    }
    Ok(())
}
