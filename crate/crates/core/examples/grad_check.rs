//! Finite-difference check of the analytic gradient for each head.
//!
//! `cargo run --release --example grad_check`

use qsrec::model::{Model, ModelShape};
use qsrec::train::grad_check;

fn main() -> qsrec::Result<()> {
    let sessions = vec![vec![0, 3, 5, 2], vec![7, 1, 1, 4, 9], vec![2, 8], vec![6, 5, 3]];
    for shape in [ModelShape::vector(10, 3, 4), ModelShape::fc(10, 3, 4, 3), ModelShape::matrix(10, 3, 3)] {
        let model = Model::<f64>::new(shape, 11)?;
        let report = grad_check(&model, &sessions, 2, 1e-5)?;
        println!(
            "{:6} {} coordinates, max relative error {:.2e} at {} [{}]: {}",
            shape.head.name(),
            report.coordinates,
            report.max_rel_error,
            report.worst.0,
            report.worst.1,
            if report.passed() { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
