//! Trains the wave preset, prints the error at every snapshot and fits a
//! power law to the error history.
//!
//! Usage: `wave1d [layers] [budget] [seed] [snapshot interval]`.

use std::time::Instant;

use pinn::metrics::{fit_convergence_rate, rel_l2_error};
use pinn::network::Activation;
use pinn::pde::PdeProblem;
use pinn::training::{reference_grid, train, LossSpec, NetworkSpec, OptimizerSpec, TrainConfig};

fn main() -> pinn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let layers: Vec<usize> = args
        .get(1)
        .map(|s| {
            s.split(',')
                .map(|v| v.parse().expect("layer width"))
                .collect()
        })
        .unwrap_or_else(|| vec![2, 8, 4, 2, 1]);
    let budget: usize = args.get(2).map_or(1000, |s| s.parse().expect("budget"));
    let seed: u64 = args.get(3).map_or(1, |s| s.parse().expect("seed"));
    let interval: usize = args
        .get(4)
        .map_or(100, |s| s.parse().expect("snapshot interval"));

    let problem = PdeProblem::wave1d();
    let net = NetworkSpec {
        layers,
        activation: Activation::Tanh,
        hard_constraints: false,
    };
    let loss = LossSpec::three_term(1000, 1000, 10_000);
    let mut cfg = TrainConfig::new(budget);
    cfg.snapshot_interval = interval;
    let start = Instant::now();
    let run = train(&problem, &net, &OptimizerSpec::lbfgs(), &loss, &cfg, seed)?;
    let truth = reference_grid(
        &problem.analytical().expect("series"),
        &problem,
        cfg.snapshot_shape,
    );
    let mut errors = Vec::new();
    for (iter, snap) in &run.history.snapshots {
        let r = &run.history.records[iter - 1];
        let e = rel_l2_error(&truth.values, &snap.values)?;
        println!("{iter:5} loss {:.3e} rel_l2 {e:.4}", r.total_loss);
        errors.push((*iter as f64, e));
    }
    let (gamma, rate) = fit_convergence_rate(&errors)?;
    println!("fit: error ≈ {gamma:.3} N^{rate:.3}");
    println!(
        "{} evaluations in {:.1} s",
        run.history.evaluations,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
