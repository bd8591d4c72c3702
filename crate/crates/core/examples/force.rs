//! Force data for one residual: how each training row pushes it from 0.
use resdecomp::analysis::force_segments;
use resdecomp::dataio::{synthesize_linear, SplitPlan};
use resdecomp::engine::decompose_exact;
use resdecomp::models::ModelSpec;
use resdecomp::plot::force_svg;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = synthesize_linear(8, 1, 0.5, 8)?;
    let phi = decompose_exact(&ModelSpec::ridge(1.0), &ds, &SplitPlan::symmetric(8))?;
    let force = force_segments(&phi, &ds, "2")?;
    println!("{}", serde_json::to_string_pretty(&force)?);
    let path = std::env::temp_dir().join("force_2.svg");
    std::fs::write(&path, force_svg(&force))?;
    println!("wrote {}", path.display());
    Ok(())
}
