//! Simulate the 12-state averaged model over a bundled scenario and write the
//! trace as CSV plus a JSON sidecar.
//!
//! `cargo run --release --example full_simulation [scenario] [out-dir]`

use dvoc_reduce::scenario::{invariant_breaches, run, ModelChoice, Scenario};
use dvoc_reduce::sim::{Signal, ASSUMPTION1_EPS};

fn main() -> dvoc_reduce::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "default-inductive".into());
    let out = args.next().unwrap_or_else(|| "out".into());

    let s = Scenario::load(&name)?;
    let r = run(&s, ModelChoice::Full)?;
    let t = &r.trace;
    println!("{}: {} samples, {} steps, {:.3} s wall", s.name, t.len(), t.step_count(), t.wall_time);

    let p = t.signal(Signal::P);
    let q = t.signal(Signal::Q);
    for b in &s.schedule.breakpoints {
        let k = t.index_at(b.t);
        println!("t = {:>4.1} s  P* = {:>5.2}  P = {:>7.4}  Q = {:>7.4}", b.t, b.s_star[0], p[k], q[k]);
    }
    println!("invariant breaches: {}", invariant_breaches(t, &r.params).len());

    t.write_files(out.as_ref(), &format!("{}-full", s.name), &r.violations, ASSUMPTION1_EPS)?;
    println!("wrote {out}/{}-full.csv", s.name);
    Ok(())
}
