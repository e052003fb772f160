//! Recomputes the bundled results tables and prints the verification report.
//!
//! cargo run --example verify_tables

use lpo::report::{verify_tables, TablesFixture};

fn main() {
    let v = verify_tables(&TablesFixture::bundled());
    print!("{}", v.render());
    let fr = v.summary.overall.fr;
    println!(
        "FR: {}/{} successful, mean drop {:.2}, mean rise {:.2}",
        fr.success_count,
        fr.trial_count,
        fr.mean_drop.unwrap_or(f64::NAN),
        fr.mean_rise.unwrap_or(f64::NAN)
    );
    std::process::exit(if v.passed() { 0 } else { 1 });
}
