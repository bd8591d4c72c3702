//! Drives the command-line entry point in-process on a generated CSV.
use resdecomp::dataio::{synthesize_linear, write_csv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("resdecomp_example");
    std::fs::create_dir_all(&dir)?;
    let input = dir.join("data.csv");
    write_csv(&synthesize_linear(30, 2, 0.2, 1)?, &input)?;
    let input = input.to_string_lossy().to_string();
    let out = dir.to_string_lossy().to_string();
    let common = ["--input", &input, "--target", "target", "--out", &out, "--seed", "3"];
    for cmd in [vec!["cc", "--plots"], vec!["outliers"], vec!["compare", "--test-fraction", "0.2"]] {
        let args = ["resdecomp"].into_iter().chain(cmd.iter().copied()).chain(common);
        let code = resdecomp::cli::main_with_args(args);
        println!("{} -> exit {code}", cmd.join(" "));
    }
    println!("outputs in {out}");
    Ok(())
}
