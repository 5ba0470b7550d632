//! Prints the derived reference constants and dimensionless groups of the
//! default Earth-like configuration.
//!
//! Run: cargo run --example nondimensional_report

use mantle::physics::{derived_constants_report, ReferenceConstants};

fn main() {
    let rc = ReferenceConstants::default();
    print!("{}", derived_constants_report(&rc));
    let myr = 1.0e6 * 365.25 * 24.0 * 3600.0;
    let n = mantle::physics::nondimensionalize(&rc);
    println!("1 Myr = {:.4e} nondimensional time units", myr / n.t0);
}
