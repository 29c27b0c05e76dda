//! Proximal gradient descent with the silver schedule on a lasso instance.
//!
//!     cargo run --example silver_prox_gd -- 4

use peplift::catalog::{envelope, Algorithm};
use peplift::problems::{make_problem, ProblemKind, ProblemSpec};
use peplift::report::{lift_cell, XiMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let spec = ProblemSpec::new(ProblemKind::Lasso, 60, 30, 7);
    let p = make_problem(&spec)?;
    let x0 = spec.starting_point(p.dim());

    let algo = Algorithm::Silver;
    let trace = algo.run(&p, k, &x0)?;
    let rate = lift_cell(algo, k, XiMode::Default)?.rate;
    let env = envelope(algo.metric(), rate, &trace, &p)?;

    println!("{} steps, L = {:.4}", trace.n(), trace.lipschitz);
    for (i, gap) in trace.gaps(p.f_star.unwrap()).iter().enumerate() {
        println!("{i:3}  {gap:.6e}");
    }
    println!("F_n - F* = {:.6e} <= {:.6e} (ratio {:.3})", env.observed, env.bound, env.ratio());
    Ok(())
}
