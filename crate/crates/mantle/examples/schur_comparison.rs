//! Compares the three Schur complement approximations (and the asymmetric
//! weighted variant) under all three Uzawa orderings on the initial Stokes
//! solve; per-iteration residual traces land in solver_bench.csv.
//!
//! Run: cargo run --release --example schur_comparison [LEVEL]

use mantle::app::{run_solver_bench, RunConfig};

fn main() {
    let level: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let mut cfg = RunConfig::default();
    cfg.bench_level = level;
    cfg.output_dir = "out-schur".into();
    cfg.wall_budget_seconds = 1800.0;
    let runs = run_solver_bench(&cfg).expect("bench");
    println!("\n{:<18} {:<14} {:>6} {:>10}", "uzawa", "schur", "iters", "rel resid");
    for r in &runs {
        let last = r.trace.last().map(|t| t.2).unwrap_or(f64::NAN);
        let label = if r.a_r != 1.0 {
            format!("{} (a_r={})", r.schur.label(), r.a_r)
        } else {
            r.schur.label().to_string()
        };
        println!(
            "{:<18} {:<14} {:>6} {:>10.2e}",
            r.uzawa.label(),
            label,
            r.trace.len(),
            last
        );
    }
    println!("\nfull traces: out-schur/solver_bench.csv");
}
