//! Prints the fitted error slope and per-point errors of every preset sweep.
//!
//! cargo run --release --example convergence_table

use hmm_core::{run_sweep, Method, Preset};

fn main() {
    for p in Preset::ALL {
        for m in Method::ALL {
            let out = run_sweep(&p.sweep(m)).expect("preset sweeps are valid");
            let errs: Vec<String> = out
                .rows
                .iter()
                .map(|r| format!("{:.3e}", r.error))
                .collect();
            println!(
                "{p} {m}: slope {:.4} r2 {:.4}  {}",
                out.fit.slope,
                out.fit.r_squared,
                errs.join(" ")
            );
        }
    }
}
