//! Exact decomposition of a tiny ridge problem, checked row by row.
use resdecomp::dataio::{synthesize_linear, SplitPlan};
use resdecomp::engine::decompose_exact;
use resdecomp::models::ModelSpec;

fn main() -> resdecomp::Result<()> {
    let ds = synthesize_linear(6, 2, 0.3, 1)?;
    let phi = decompose_exact(&ModelSpec::ridge(1.0), &ds, &SplitPlan::symmetric(6))?;
    print!("{}", phi.to_csv_string());
    for i in 0..phi.n_test() {
        println!("row {i}: sum {:+.6}  residual {:+.6}", phi.row_sum(i), phi.residuals_full[i]);
    }
    Ok(())
}
