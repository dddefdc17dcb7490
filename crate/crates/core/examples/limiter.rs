//! The smooth current-reference limiter against the hard `min(1, I_max/x)`,
//! and the implicit limiter factor that survives model reduction.

use dvoc_reduce::frames::dq;
use dvoc_reduce::limiter::{gain_matrices, rho_exact_min, rho_smooth, solve_rho_reduced};
use dvoc_reduce::{LineType, ParameterSet};

fn main() -> dvoc_reduce::Result<()> {
    let i_max = 1.2;
    println!("{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "|I*|", "exact", "eps=0.1", "eps=0.2", "eps=0.3", "eps=0.4");
    for x in [0.2, 0.6, 1.0, 1.2, 1.5, 2.4, 5.0, 20.0] {
        print!("{x:>8.2} {:>8.4}", rho_exact_min(x, i_max));
        for eps in [0.1, 0.2, 0.3, 0.4] {
            print!(" {:>8.4}", rho_smooth(x, i_max, eps));
        }
        println!();
    }

    // After the fast states are eliminated rho depends on the slow states
    // through a scalar constraint.
    let p = ParameterSet::table1_for(LineType::Inductive);
    println!("\n{:>6} {:>6} {:>10} {:>10} {:>6}", "Igd", "Igq", "rho", "|A1|", "iters");
    for (d, q) in [(0.3, 0.1), (1.0, 0.0), (1.5, -0.5), (3.0, 2.0)] {
        let sol = solve_rho_reduced(1.0, &dq(d, q), &p)?;
        let g = gain_matrices(sol.rho, &p)?;
        println!("{d:>6.2} {q:>6.2} {:>10.6} {:>10.6} {:>6}", sol.rho, g.a1.norm(), sol.iterations);
    }
    Ok(())
}
