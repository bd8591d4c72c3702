//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Tolerances are fixed constants below.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use resdecomp::analysis::{
    ablation_curve, behavioral_outliers, cc_summary, contribution_value, data_shapley_values, decomposition_accuracy,
    normalize_contribution, spearman, Direction, OutlierMode, ValueKind,
};
use resdecomp::dataio::{inject_anomalies, make_split, synthesize_linear, write_csv, Dataset, SplitPlan};
use resdecomp::engine::{decompose_exact, decompose_monte_carlo, McConfig};
use resdecomp::influence::{decompose_all_s, decompose_largest_s, InfluenceConfig};
use resdecomp::kernel::decompose_kernel;
use resdecomp::models::ModelSpec;
use resdecomp::phi::PhiMatrix;

const ORACLE_TOL: f64 = 1e-9;
const KERNEL_TOL: f64 = 1e-6;
const ORACLE_SECONDS: f64 = 60.0;
const EFFICIENCY_REL: f64 = 1e-8;
const MC_SE_MULT: f64 = 4.0;
const MC_SE_FLOOR: f64 = 1e-12;
const AXIOM_TOL: f64 = 1e-9;
const INFLUENCE_SPEARMAN: f64 = 0.8;
const RUNTIME_SECONDS: f64 = 600.0;
const CURVE_SPEARMAN: f64 = 0.5;
const MIRROR_REL: f64 = 0.10;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn dataset(xs: &[Vec<f64>], ys: &[f64]) -> Dataset {
    Dataset::from_rows(xs.to_vec(), ys.to_vec()).unwrap()
}

fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.ncols()).map(|j| m.column(j).mean()).collect()
}

fn mc_cfg(seed: u64) -> McConfig {
    McConfig { convergence_tol: 0.0, ..McConfig::default().with_seed(seed).without_truncation() }
}

/// Worst `|row sum - e| / max(max|e|, 1e-12)`.
fn efficiency_gap(phi: &PhiMatrix) -> f64 {
    let scale = phi.residuals_full.iter().fold(1e-12f64, |m, e| m.max(e.abs()));
    (0..phi.n_test()).map(|i| (phi.row_sum(i) - phi.residuals_full[i]).abs() / scale).fold(0.0, f64::max)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let (mut worst_exact, mut worst_kernel) = (0.0f64, 0.0f64);
    for seed in 0..5u64 {
        let n = 4 + seed as usize;
        let (xs, ys) = random_problem(100 + seed, n, 2, 0.3);
        let lambda = 0.3 + 0.4 * seed as f64;
        let all: Vec<usize> = (0..n).collect();
        let oracle = shapley_by_subsets(n, n, |s| ridge_residuals(&xs, &ys, s, &all, lambda, true));
        let ds = dataset(&xs, &ys);
        let split = SplitPlan::symmetric(n);
        let spec = ModelSpec::ridge(lambda);
        let exact = decompose_exact(&spec, &ds, &split).map_err(|e| e.to_string())?;
        worst_exact = worst_exact.max(max_abs_diff(&oracle, &exact.values));
        let kernel = decompose_kernel(&spec, &ds, &split, (1 << n) + 16, seed, 0).map_err(|e| e.to_string())?;
        worst_kernel = worst_kernel.max((&kernel.values - &exact.values).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst_exact <= ORACLE_TOL && worst_kernel <= KERNEL_TOL && secs < ORACLE_SECONDS,
        format!("exact vs oracle {worst_exact:.2e} (tol {ORACLE_TOL:e}), kernel vs exact {worst_kernel:.2e} (tol {KERNEL_TOL:e}), {secs:.2}s"),
    )
}

fn criterion_2() -> Check {
    let mut fixtures: Vec<(String, Dataset, SplitPlan, ModelSpec)> = Vec::new();
    for seed in 0..5u64 {
        let (xs, ys) = random_problem(100 + seed, 4 + seed as usize, 2, 0.3);
        let n = ys.len();
        fixtures.push((format!("random{seed}"), dataset(&xs, &ys), SplitPlan::symmetric(n), ModelSpec::ridge(0.5)));
    }
    let (xs, ys) = random_problem(21, 12, 3, 0.2);
    fixtures.push(("asymmetric".into(), dataset(&xs, &ys), make_split(12, 0.25, 1, false).unwrap(), ModelSpec::ridge_no_intercept(0.7)));
    fixtures.push(("constant".into(), synthesize_linear(8, 2, 0.1, 3).unwrap(), SplitPlan::symmetric(8), ModelSpec::constant(0.0)));
    fixtures.push((
        "forest".into(),
        synthesize_linear(9, 2, 0.1, 4).unwrap(),
        SplitPlan::symmetric(9),
        ModelSpec { kind: resdecomp::models::ModelKind::Forest { trees: 5, min_leaf: 1, feature_fraction: 1.0 }, fit_seed: 4 },
    ));
    let planted = planted_fixture(0);
    fixtures.push(("planted".into(), planted.0, planted.1, ModelSpec::ridge(1.0)));

    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (name, ds, split, spec) in &fixtures {
        let mut runs: Vec<(&str, PhiMatrix)> = Vec::new();
        if split.train().len() <= 10 {
            runs.push(("exact", decompose_exact(spec, ds, split).map_err(|e| format!("{name}: {e}"))?));
        }
        runs.push((
            "mc",
            decompose_monte_carlo(spec, ds, split, &McConfig::default().with_seed(5).without_truncation())
                .map_err(|e| format!("{name}: {e}"))?,
        ));
        runs.push((
            "kernel",
            decompose_kernel(spec, ds, split, 2 * split.train().len() + 2048, 5, 0).map_err(|e| format!("{name}: {e}"))?,
        ));
        for (est, phi) in runs {
            let g = efficiency_gap(&phi);
            if g > worst {
                worst = g;
                worst_at = format!("{name}/{est}");
            }
        }
    }
    ensure(
        worst <= EFFICIENCY_REL,
        format!("{} fixtures, worst relative row-sum gap {worst:.2e} at {worst_at} (tol {EFFICIENCY_REL:e})", fixtures.len()),
    )
}

fn criterion_3() -> Check {
    let ds = synthesize_linear(6, 2, 0.3, 11).unwrap();
    let split = SplitPlan::symmetric(6);
    let spec = ModelSpec::ridge(1.0);
    let exact = decompose_exact(&spec, &ds, &split).map_err(|e| e.to_string())?;
    let mc = decompose_monte_carlo(&spec, &ds, &split, &mc_cfg(3).permutations(5000)).map_err(|e| e.to_string())?;
    let se = mc.std_errors.as_ref().unwrap();
    let mut worst = 0.0f64;
    for i in 0..6 {
        for j in 0..6 {
            let d = (mc.values[(i, j)] - exact.values[(i, j)]).abs();
            let ratio = if se[(i, j)] > 0.0 { d / se[(i, j)] } else if d <= MC_SE_FLOOR { 0.0 } else { f64::INFINITY };
            worst = worst.max(ratio);
        }
    }

    let n = 10;
    let cds = synthesize_linear(n, 1, 0.5, 12).unwrap();
    let cphi = decompose_monte_carlo(&ModelSpec::constant(0.0), &cds, &SplitPlan::symmetric(n), &McConfig::default().with_seed(3))
        .map_err(|e| e.to_string())?;
    let used = cphi.meta.permutations_used;
    ensure(
        worst <= MC_SE_MULT && cphi.meta.converged && used <= 3 * n,
        format!(
            "worst |mc - exact| / se = {worst:.2} (limit {MC_SE_MULT}); constant fixture converged={} after {used} permutations (limit {})",
            cphi.meta.converged,
            3 * n
        ),
    )
}

fn criterion_4() -> Check {
    let mut worst_dup = 0.0f64;
    for seed in 0..5u64 {
        let (mut xs, mut ys) = random_problem(200 + seed, 6, 2, 0.4);
        xs.push(xs[2].clone());
        ys.push(ys[2]);
        let n = ys.len();
        let phi = decompose_exact(&ModelSpec::ridge(0.8), &dataset(&xs, &ys), &SplitPlan::symmetric(n)).map_err(|e| e.to_string())?;
        for i in 0..n {
            worst_dup = worst_dup.max((phi.values[(i, 2)] - phi.values[(i, n - 1)]).abs());
        }
    }

    let n = 9;
    let ds = synthesize_linear(n, 2, 0.5, 13).unwrap();
    let split = SplitPlan::symmetric(n);
    let spec = ModelSpec::constant(0.0);
    let runs = [
        ("exact", decompose_exact(&spec, &ds, &split).map_err(|e| e.to_string())?),
        ("mc", decompose_monte_carlo(&spec, &ds, &split, &McConfig::default().with_seed(1)).map_err(|e| e.to_string())?),
        ("kernel", decompose_kernel(&spec, &ds, &split, 2 * n + 2048, 1, 0).map_err(|e| e.to_string())?),
    ];
    let mut worst_const = 0.0f64;
    for (_, phi) in &runs {
        for i in 0..n {
            for j in 0..n {
                worst_const = worst_const.max((phi.values[(i, j)] + ds.target(i) / n as f64).abs());
            }
        }
    }
    ensure(
        worst_dup <= AXIOM_TOL && worst_const <= AXIOM_TOL,
        format!("duplicate columns differ by {worst_dup:.2e}; constant model vs -y/N {worst_const:.2e} over exact, mc, kernel (tol {AXIOM_TOL:e})"),
    )
}

fn criterion_5() -> Check {
    let mut passes = 0;
    let mut rhos = Vec::new();
    let mut err_largest = Vec::new();
    let mut err_mc = Vec::new();
    let spec = ModelSpec::ridge(1.0);
    for seed in 0..5u64 {
        let ds = synthesize_linear(6, 2, 0.3, seed).unwrap();
        let split = SplitPlan::symmetric(6);
        let exact = decompose_exact(&spec, &ds, &split).map_err(|e| e.to_string())?;
        let cfg = InfluenceConfig { subset_samples: Some(500), seed, ..InfluenceConfig::default() };
        let all = decompose_all_s(&spec, &ds, &split, &cfg).map_err(|e| e.to_string())?;
        let rho = spearman(&column_means(&all.values), &column_means(&exact.values));
        if rho >= INFLUENCE_SPEARMAN {
            passes += 1;
        }
        rhos.push(format!("{rho:.3}"));
        let largest = decompose_largest_s(&spec, &ds, &split).map_err(|e| e.to_string())?;
        let mc = decompose_monte_carlo(&spec, &ds, &split, &McConfig::default().with_seed(seed)).map_err(|e| e.to_string())?;
        err_largest.push(decomposition_accuracy(&largest).mean);
        err_mc.push(decomposition_accuracy(&mc).mean);
    }
    let worse = err_largest.iter().zip(&err_mc).all(|(l, m)| l > m);
    ensure(
        passes >= 3 && worse,
        format!(
            "all-S spearman [{}] ({passes}/5 >= {INFLUENCE_SPEARMAN}); largest-S mean error {:.3e}..{:.3e} vs mc {:.3e}",
            rhos.join(", "),
            err_largest.iter().cloned().fold(f64::INFINITY, f64::min),
            err_largest.iter().cloned().fold(0.0, f64::max),
            err_mc.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let spec = ModelSpec::ridge(1.0);
    let mut mc_t = Vec::new();
    let mut inf_t = Vec::new();
    for &n in &[50usize, 100, 200] {
        let ds = synthesize_linear(n, 3, 0.3, 7).unwrap();
        let split = SplitPlan::symmetric(n);
        let time = |f: &dyn Fn() -> resdecomp::Result<PhiMatrix>| -> Result<f64, String> {
            let mut best = f64::INFINITY;
            for _ in 0..2 {
                let t = Instant::now();
                f().map_err(|e| e.to_string())?;
                best = best.min(t.elapsed().as_secs_f64());
            }
            Ok(best)
        };
        let mc_cfg = McConfig { threads: 1, ..McConfig::default().with_seed(1) };
        mc_t.push(time(&|| decompose_monte_carlo(&spec, &ds, &split, &mc_cfg))?);
        let inf_cfg = InfluenceConfig { threads: 1, seed: 1, ..InfluenceConfig::default() };
        inf_t.push(time(&|| decompose_all_s(&spec, &ds, &split, &inf_cfg))?);
    }
    let faster = mc_t.iter().zip(&inf_t).all(|(m, i)| i < m);
    let mc_growth = mc_t[2] / mc_t[0];
    let inf_growth = inf_t[2] / inf_t[0];
    let secs = start.elapsed().as_secs_f64();
    ensure(
        faster && mc_growth > inf_growth && secs < RUNTIME_SECONDS,
        format!(
            "mc {:.3}/{:.3}/{:.3}s, influence-all {:.3}/{:.3}/{:.3}s at N=50/100/200; growth {mc_growth:.1}x vs {inf_growth:.1}x; {secs:.1}s total",
            mc_t[0], mc_t[1], mc_t[2], inf_t[0], inf_t[1], inf_t[2]
        ),
    )
}

fn criterion_7() -> Check {
    let sigma = 0.1;
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let ds = synthesize_linear(100, 1, sigma, seed).unwrap();
        let (ds, injected) = inject_anomalies(&ds, 5, 10.0 * sigma, seed).map_err(|e| e.to_string())?;
        let phi = decompose_monte_carlo(&ModelSpec::ridge(1.0), &ds, &SplitPlan::symmetric(100), &McConfig::default().with_seed(seed))
            .map_err(|e| e.to_string())?;
        let c = normalize_contribution(&phi);
        let cc = cc_summary(&phi, &c, &ds).map_err(|e| e.to_string())?;
        let mut order: Vec<usize> = (0..cc.len()).collect();
        order.sort_by(|&a, &b| {
            let ma = cc[a].contribution.unwrap().mean.abs();
            let mb = cc[b].contribution.unwrap().mean.abs();
            mb.total_cmp(&ma)
        });
        let decile: Vec<&str> = order[..10].iter().map(|&k| cc[k].id.as_str()).collect();
        let in_decile = injected.iter().filter(|id| decile.contains(&id.as_str())).count();
        let report = behavioral_outliers(&c, &ds, OutlierMode::Behavior, 0.1, seed).map_err(|e| e.to_string())?;
        let flagged = report.behavior.unwrap_or_default();
        let hits = injected.iter().filter(|id| flagged.contains(id)).count();
        ok &= in_decile == 5 && hits >= 4;
        lines.push(format!("seed {seed}: {in_decile}/5 in top decile, {hits}/5 flagged"));
    }
    ensure(ok, lines.join("; "))
}

/// n=40 linear data, 25% test, +2 target shift on three training rows.
fn planted_fixture(seed: u64) -> (Dataset, SplitPlan, Vec<usize>) {
    let ds = synthesize_linear(40, 2, 0.1, seed).unwrap();
    let split = make_split(40, 0.25, seed, false).unwrap();
    let planted: Vec<usize> = [1, 7, 13].iter().map(|&k| split.train()[k]).collect();
    let mut y = ds.targets().to_vec();
    for &r in &planted {
        y[r] += 2.0;
    }
    (ds.with_targets(y).unwrap(), split, planted)
}

fn criterion_8() -> Check {
    let spec = ModelSpec::ridge(1.0);
    let random_seeds: Vec<u64> = (0..10).collect();
    let mut ok = true;
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let (ds, split, _) = planted_fixture(seed);
        let n = split.train().len();
        let top = (n / 10).max(1);
        let phi = decompose_monte_carlo(&spec, &ds, &split, &McConfig::default().with_seed(seed)).map_err(|e| e.to_string())?;
        let cv = contribution_value(&normalize_contribution(&phi), ValueKind::MeanSq);
        let high = ablation_curve(&spec, &ds, &split, &cv, Direction::RemoveHigh, top, &[]).map_err(|e| e.to_string())?;
        let random = ablation_curve(&spec, &ds, &split, &[], Direction::Random, top, &random_seeds).map_err(|e| e.to_string())?;
        let d_high = high[top].mse - high[0].mse;
        let d_random = random[top].mse - random[0].mse;

        let dsv = data_shapley_values(&spec, &ds, &split, &McConfig::default().with_seed(seed)).map_err(|e| e.to_string())?;
        let harm: Vec<f64> = dsv.values.iter().map(|v| -v).collect();
        let steps = n / 2;
        let by_cv = ablation_curve(&spec, &ds, &split, &cv, Direction::RemoveHigh, steps, &[]).map_err(|e| e.to_string())?;
        let by_ds = ablation_curve(&spec, &ds, &split, &harm, Direction::RemoveHigh, steps, &[]).map_err(|e| e.to_string())?;
        let a: Vec<f64> = by_cv.iter().map(|r| r.mse).collect();
        let b: Vec<f64> = by_ds.iter().map(|r| r.mse).collect();
        let curve_rho = spearman(&a, &b);
        let rank_rho = spearman(&cv, &harm);
        ok &= d_high < d_random && curve_rho >= CURVE_SPEARMAN;
        lines.push(format!(
            "seed {seed}: top-{top} removal dMSE {d_high:.4} vs random {d_random:.4}, curve spearman {curve_rho:.2}, ranking spearman {rank_rho:.2} (info)"
        ));
    }
    ensure(ok, lines.join("; "))
}

fn criterion_9() -> Check {
    let a = [1.5, 0.5];
    let delta = 0.5;
    let mut xs: Vec<Vec<f64>> = (-2..=2).map(|x| vec![x as f64]).collect();
    let mut ys: Vec<f64> = (-2..=2).map(|x| x as f64).collect();
    let mut pairs = Vec::new();
    for &ak in &a {
        pairs.push((xs.len(), xs.len() + 1));
        xs.push(vec![ak]);
        ys.push(ak + delta);
        xs.push(vec![-ak]);
        ys.push(-ak - delta);
    }
    let n = ys.len();
    let ds = dataset(&xs, &ys);
    let phi = decompose_exact(&ModelSpec::ridge(0.1), &ds, &SplitPlan::symmetric(n)).map_err(|e| e.to_string())?;
    let means = column_means(&phi.values);
    let c = normalize_contribution(&phi);
    let cmeans = column_means(&c.values);
    let mut ok = true;
    let mut lines = Vec::new();
    for &(p, q) in &pairs {
        let (u, v) = (means[p], means[q]);
        let rel = (u.abs() - v.abs()).abs() / u.abs().max(v.abs()).max(1e-300);
        ok &= u * v < 0.0 && rel <= MIRROR_REL;
        lines.push(format!(
            "x={:+}/{:+}: column means {u:+.4}/{v:+.4}, normalized {:+.4}/{:+.4} (info)",
            xs[p][0], xs[q][0], cmeans[p], cmeans[q]
        ));
    }
    ensure(ok, lines.join("; "))
}

fn snapshot(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            let text = fs::read_to_string(&p).unwrap();
            (name.clone(), mask_wall_time(&name, &text))
        })
        .collect();
    files.sort();
    files
}

/// Blanks wall-clock fields; compare rows are ordered by time, so they are
/// sorted after masking.
fn mask_wall_time(name: &str, text: &str) -> String {
    if name == "compare.csv" {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().to_string();
        let mut rows: Vec<String> = lines
            .map(|l| {
                let mut cells: Vec<&str> = l.split(',').collect();
                if cells.len() > 2 {
                    cells[2] = "*";
                }
                cells.join(",")
            })
            .collect();
        rows.sort();
        return std::iter::once(header).chain(rows).collect::<Vec<_>>().join("\n");
    }
    text.lines()
        .map(|l| match l.find("\"wall_time_seconds\":") {
            Some(k) => format!("{}\"wall_time_seconds\": *", &l[..k]),
            None => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("data.csv");
    write_csv(&planted_fixture(1).0, &input).map_err(|e| e.to_string())?;
    let input = input.to_str().unwrap().to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["decompose", "--estimator", "mc"],
        vec!["decompose", "--estimator", "kernel"],
        vec!["decompose", "--estimator", "influence-all"],
        vec!["decompose", "--model", "forest", "--trees", "10", "--estimator", "mc"],
        vec!["cc", "--variance"],
        vec!["force", "--instance", "3", "--plots"],
        vec!["outliers"],
        vec!["ablate", "--ranking", "datashapley", "--plots"],
        vec!["compare", "--estimators", "mc,kernel,influence-all,influence-largest"],
    ];
    let mut checked = 0;
    for (k, cmd) in commands.iter().enumerate() {
        let mut snaps = Vec::new();
        for (run, threads) in ["1", "8", "8"].iter().enumerate() {
            let out = dir.path().join(format!("c{k}_{run}"));
            let mut args: Vec<&str> = cmd.clone();
            let out_s = out.to_str().unwrap().to_string();
            args.extend(["--input", &input, "--target", "target", "--seed", "42", "--threads", threads, "--out", &out_s]);
            if cmd[0] != "cc" && cmd[0] != "force" && cmd[0] != "outliers" {
                args.extend(["--test-fraction", "0.25"]);
            }
            let o = Command::new(env!("CARGO_BIN_EXE_resdecomp")).args(&args).output().map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!("{}: {}", cmd.join(" "), String::from_utf8_lossy(&o.stderr).trim()));
            }
            snaps.push(snapshot(&out));
        }
        for s in &snaps[1..] {
            if *s != snaps[0] {
                let names: Vec<&str> = snaps[0]
                    .iter()
                    .zip(s)
                    .filter(|(a, b)| a != b)
                    .map(|(a, _)| a.0.as_str())
                    .collect();
                return Err(format!("{} differs in {:?}", cmd.join(" "), names));
            }
        }
        checked += snaps[0].len();
    }
    Ok(format!("{} commands x 3 runs (threads 1/8/8), {checked} files identical with wall time masked", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("oracle equivalence", criterion_1),
        ("efficiency", criterion_2),
        ("monte carlo convergence", criterion_3),
        ("shapley axioms", criterion_4),
        ("influence quality", criterion_5),
        ("runtime scaling", criterion_6),
        ("anomaly surfacing", criterion_7),
        ("ablation separation", criterion_8),
        ("toy symmetry", criterion_9),
        ("determinism", criterion_10),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.contains(&(k + 1)) {
            continue;
        }
        match check() {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
