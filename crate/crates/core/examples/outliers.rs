//! Behavioural outliers: isolation forest over contribution columns, next
//! to the same forest over raw features.
use resdecomp::analysis::{behavioral_outliers, normalize_contribution, OutlierMode};
use resdecomp::dataio::{inject_anomalies, synthesize_linear, SplitPlan};
use resdecomp::engine::{decompose_monte_carlo, McConfig};
use resdecomp::models::ModelSpec;

fn main() -> resdecomp::Result<()> {
    let ds = synthesize_linear(100, 1, 0.1, 0)?;
    let (ds, injected) = inject_anomalies(&ds, 5, 1.0, 0)?;
    let phi = decompose_monte_carlo(&ModelSpec::ridge(1.0), &ds, &SplitPlan::symmetric(100), &McConfig::default())?;
    let report = behavioral_outliers(&normalize_contribution(&phi), &ds, OutlierMode::Both, 0.05, 0)?;
    println!("injected: {injected:?}");
    println!("behavior: {:?}", report.behavior.unwrap_or_default());
    println!("features: {:?}", report.features.unwrap_or_default());
    println!("both:     {:?}", report.intersection.unwrap_or_default());
    Ok(())
}
