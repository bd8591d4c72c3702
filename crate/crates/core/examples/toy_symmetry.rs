//! Points on y = x plus two mirrored pairs pushed off the line by the same
//! amount in opposite directions. The mirrored columns come out equal and
//! opposite.
use resdecomp::analysis::normalize_contribution;
use resdecomp::dataio::{Dataset, SplitPlan};
use resdecomp::engine::decompose_exact;
use resdecomp::models::ModelSpec;

fn main() -> resdecomp::Result<()> {
    let mut xs: Vec<f64> = (-2..=2).map(f64::from).collect();
    let mut ys = xs.clone();
    for a in [1.5, 0.5] {
        xs.extend([a, -a]);
        ys.extend([a + 0.5, -a - 0.5]);
    }
    let ds = Dataset::from_rows(xs.iter().map(|&x| vec![x]).collect(), ys.clone())?;
    let phi = decompose_exact(&ModelSpec::ridge(0.1), &ds, &SplitPlan::symmetric(xs.len()))?;
    let c = normalize_contribution(&phi);
    println!("    x      y   column mean   normalized mean");
    for j in 0..xs.len() {
        println!(
            "{:+5.1}  {:+5.1}   {:+11.4}   {:+15.4}",
            xs[j],
            ys[j],
            phi.values.column(j).mean(),
            c.values.column(j).mean()
        );
    }
    Ok(())
}
