//! Data Shapley next to contribution value, and the ablation curves they
//! produce on data with three mislabelled training rows.
use resdecomp::analysis::{
    ablation_curve, contribution_value, data_shapley_values, normalize_contribution, Direction, ValueKind,
};
use resdecomp::dataio::{make_split, synthesize_linear};
use resdecomp::engine::{decompose_monte_carlo, McConfig};
use resdecomp::models::ModelSpec;

fn main() -> resdecomp::Result<()> {
    let ds = synthesize_linear(40, 2, 0.1, 0)?;
    let split = make_split(40, 0.25, 0, false)?;
    let mut y = ds.targets().to_vec();
    for k in [1, 7, 13] {
        y[split.train()[k]] += 2.0;
    }
    let ds = ds.with_targets(y)?;
    let spec = ModelSpec::ridge(1.0);

    let phi = decompose_monte_carlo(&spec, &ds, &split, &McConfig::default())?;
    let cv = contribution_value(&normalize_contribution(&phi), ValueKind::MeanSq);
    let dsv = data_shapley_values(&spec, &ds, &split, &McConfig::default())?;
    let harm: Vec<f64> = dsv.values.iter().map(|v| -v).collect();

    let steps = 10;
    let seeds: Vec<u64> = (0..10).collect();
    let by_cv = ablation_curve(&spec, &ds, &split, &cv, Direction::RemoveHigh, steps, &[])?;
    let by_ds = ablation_curve(&spec, &ds, &split, &harm, Direction::RemoveHigh, steps, &[])?;
    let random = ablation_curve(&spec, &ds, &split, &[], Direction::Random, steps, &seeds)?;
    println!("removed  contribution  datashapley  random");
    for k in 0..=steps {
        println!("{k:>7}  {:>12.5}  {:>11.5}  {:>6.5}", by_cv[k].mse, by_ds[k].mse, random[k].mse);
    }
    Ok(())
}
