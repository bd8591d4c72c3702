//! Contribution/composition summaries and the CC scatter plot.
use resdecomp::analysis::{cc_summary, normalize_contribution, CcSummary};
use resdecomp::dataio::{synthesize_linear, SplitPlan};
use resdecomp::engine::{decompose_monte_carlo, McConfig};
use resdecomp::models::ModelSpec;
use resdecomp::plot::scatter_svg;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = synthesize_linear(40, 2, 0.3, 6)?;
    let phi = decompose_monte_carlo(&ModelSpec::ridge(1.0), &ds, &SplitPlan::symmetric(40), &McConfig::default())?;
    let c = normalize_contribution(&phi);
    let cc = cc_summary(&phi, &c, &ds)?;
    println!("{}", CcSummary::CSV_HEADER);
    for s in cc.iter().take(5) {
        println!("{}", s.csv_row());
    }
    let points: Vec<(f64, f64)> = cc
        .iter()
        .map(|s| (s.contribution.unwrap().mean, s.composition.unwrap().mean))
        .collect();
    let targets: Vec<f64> = cc.iter().map(|s| s.target).collect();
    let svg = scatter_svg(&points, &targets, "CC plot", "contribution mean", "composition mean");
    let path = std::env::temp_dir().join("cc_mean.svg");
    std::fs::write(&path, svg)?;
    println!("wrote {}", path.display());
    Ok(())
}
