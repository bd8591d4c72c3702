//! Influence approximations: all-subsets sampling and the single
//! full-data model, scored against exact values.
use resdecomp::analysis::{decomposition_accuracy, spearman};
use resdecomp::dataio::{synthesize_linear, SplitPlan};
use resdecomp::engine::decompose_exact;
use resdecomp::influence::{decompose_all_s, decompose_largest_s, InfluenceConfig};
use resdecomp::models::ModelSpec;

fn column_means(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    (0..m.ncols()).map(|j| m.column(j).mean()).collect()
}

fn main() -> resdecomp::Result<()> {
    let ds = synthesize_linear(8, 2, 0.3, 5)?;
    let split = SplitPlan::symmetric(8);
    let spec = ModelSpec::ridge(1.0);
    let exact = decompose_exact(&spec, &ds, &split)?;
    let all = decompose_all_s(&spec, &ds, &split, &InfluenceConfig { subset_samples: Some(500), ..Default::default() })?;
    let largest = decompose_largest_s(&spec, &ds, &split)?;
    let truth = column_means(&exact.values);
    for (name, phi) in [("all-S", &all), ("largest-S", &largest)] {
        println!(
            "{name:>9}: spearman vs exact {:.3}, mean row error {:.3e}, additivity violated: {}",
            spearman(&column_means(&phi.values), &truth),
            decomposition_accuracy(phi).mean,
            phi.meta.additivity_violated
        );
    }
    Ok(())
}
