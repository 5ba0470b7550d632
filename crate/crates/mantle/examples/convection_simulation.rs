//! Short desk-scale convection run: noisy adiabatic start, a few coupled
//! temperature/Stokes steps, VTK snapshots and a restartable checkpoint.
//!
//! Run: cargo run --release --example convection_simulation [STEPS]

use mantle::app::{run_simulation, RunConfig};

fn main() {
    let steps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let mut cfg = RunConfig::default();
    cfg.max_level = 3;
    cfg.viscosity_level = 1;
    cfg.max_steps = steps;
    cfg.t_end = 1.0;
    cfg.tau_max = 1e-3;
    cfg.output_dir = "out-sim".into();
    cfg.vtk_every = 1;
    cfg.checkpoint_every = 1;
    let summary = run_simulation(&cfg, None, None).expect("simulation");
    println!(
        "ran {} steps to t = {:.4e}; fields and checkpoint in out-sim/",
        summary.steps, summary.t_end
    );
    let rms = {
        let u = &summary.final_state.velocity.coeffs;
        (u.iter().map(|v| v * v).sum::<f64>() / (u.len() as f64 / 2.0)).sqrt()
    };
    println!("final RMS velocity: {rms:.3e}");
}
