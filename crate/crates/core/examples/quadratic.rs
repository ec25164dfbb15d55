use jaguar_core::optimizers::{run, OptimizerConfig, OptimizerKind};
use jaguar_core::problems::Quadratic;

fn main() -> jaguar_core::Result<()> {
    let problem = Quadratic::new(10, 10.0, 1.0, 16, 1.0, 0)?;
    let cfg = OptimizerConfig::new(1e-3, 0.9, 1e-2, 5_000, 42);
    let trace = run(OptimizerKind::JaguarSignSgd, &problem, &cfg)?;
    println!(
        "grad l1: {:.3e} -> {:.3e}, {} oracle calls",
        trace.initial.grad_norm,
        trace.final_record().grad_norm,
        trace.oracle_calls
    );
    Ok(())
}
