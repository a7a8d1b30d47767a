//! Run one Monte Carlo cell from code and print its summary.
//!
//! ```sh
//! cargo run --release --example replicate_cell -- 1 0.3 0.8 1000 1000
//! ```

use oliva::simulate::{run_cell, Dgp, DgpConfig, EstimatorSet};

fn main() {
    let mut args = std::env::args().skip(1);
    let mut next = |name: &str, default: &str| -> String {
        args.next().unwrap_or_else(|| {
            eprintln!("({name} defaulting to {default})");
            default.to_string()
        })
    };
    let dgp = Dgp::from_index(next("dgp", "1").parse().expect("dgp index")).expect("dgp 1-3");
    let rho: f64 = next("rho", "0.3").parse().expect("rho");
    let gamma: f64 = next("gamma", "0.8").parse().expect("gamma");
    let n: usize = next("n", "1000").parse().expect("n");
    let reps: usize = next("reps", "1000").parse().expect("reps");

    let cfg = DgpConfig {
        dgp,
        rho,
        gamma,
        n,
        seed: 0,
    };
    let start = std::time::Instant::now();
    let cell = run_cell(&cfg, reps, &EstimatorSet::default(), 42).expect("valid configuration");
    let secs = start.elapsed().as_secs_f64();

    println!(
        "dgp{} rho={rho} gamma={gamma} n={n} reps={reps} ({secs:.1}s, {} failures)",
        cell.dgp, cell.failures
    );
    for (label, stats) in [("OLS ", cell.ols), ("IV  ", cell.iv), ("TSIV", cell.tsiv)] {
        if let Some(c) = stats {
            println!(
                "  {label} bias {:+.4} (mc se {:.4})   mse {:.4}",
                c.bias, c.bias_se, c.mse
            );
        }
    }
    if let Some(cov) = cell.coverage {
        println!("  95% CI coverage {:.3}", cov.rate);
    }
    if let (Some(s), Some(r)) = (cell.hausman_standard, cell.hausman_robust) {
        println!("  Hausman rejection at 5%: standard {:.3}, robust {:.3}", s.rate, r.rate);
    }
}
