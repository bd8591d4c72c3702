//! Kernel estimate with a sampled coalition budget against exact values.
use resdecomp::dataio::{synthesize_linear, SplitPlan};
use resdecomp::engine::decompose_exact;
use resdecomp::kernel::decompose_kernel;
use resdecomp::models::ModelSpec;

fn main() -> resdecomp::Result<()> {
    let ds = synthesize_linear(12, 2, 0.3, 4)?;
    let split = SplitPlan::symmetric(12);
    let spec = ModelSpec::ridge(0.5);
    let exact = decompose_exact(&spec, &ds, &split)?;
    for budget in [64, 256, 1024, 4096 + 16] {
        let phi = decompose_kernel(&spec, &ds, &split, budget, 1, 0)?;
        let err = (&phi.values - &exact.values).amax();
        println!("budget {budget:>5}: max |kernel - exact| = {err:.2e}");
    }
    Ok(())
}
