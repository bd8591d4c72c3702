//! Truncated Monte Carlo on a larger problem, compared with exact on a
//! subsample small enough to enumerate.
use resdecomp::analysis::decomposition_accuracy;
use resdecomp::dataio::{make_split, synthesize_linear, SplitPlan};
use resdecomp::engine::{decompose_exact, decompose_monte_carlo, McConfig};
use resdecomp::models::ModelSpec;

fn main() -> resdecomp::Result<()> {
    let spec = ModelSpec::ridge(1.0);

    let small = synthesize_linear(8, 2, 0.3, 2)?;
    let split = SplitPlan::symmetric(8);
    let exact = decompose_exact(&spec, &small, &split)?;
    let cfg = McConfig { convergence_tol: 0.0, ..McConfig::default().with_seed(7).permutations(2000) };
    let mc = decompose_monte_carlo(&spec, &small, &split, &cfg)?;
    let worst = (&mc.values - &exact.values).amax();
    let se = mc.std_errors.as_ref().map_or(0.0, |s| s.max());
    println!("n=8: max |mc - exact| = {worst:.4}, largest standard error {se:.4}");

    let ds = synthesize_linear(120, 3, 0.3, 3)?;
    let split = make_split(120, 0.2, 3, false)?;
    let phi = decompose_monte_carlo(&spec, &ds, &split, &McConfig::default().with_seed(7))?;
    println!(
        "n=120: {} permutations, converged={}, truncation tol {:.2e}, mean row error {:.2e}, {:.2}s",
        phi.meta.permutations_used,
        phi.meta.converged,
        phi.meta.truncation_tol,
        decomposition_accuracy(&phi).mean,
        phi.meta.wall_time_seconds
    );
    Ok(())
}
