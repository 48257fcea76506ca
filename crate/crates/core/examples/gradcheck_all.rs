//! Runs every finite-difference VJP check and prints one line per check.
//!
//! ```bash
//! cargo run -p sstdpn --example gradcheck_all
//! ```

use sstdpn::gradcheck;

fn main() {
    let checks = gradcheck::run_all(0);
    for c in &checks {
        println!(
            "{:<32} {:>10.3e}  {}",
            c.name,
            c.max_relative_error,
            if c.passed { "ok" } else { "FAIL" }
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
}
