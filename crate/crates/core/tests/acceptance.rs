use std::io::Write;

use sheetdev_core::validate::{validate, Level};

/// Criteria that fail for reasons analysed in the README: no solution of
/// ĥ′ = ε for (1,2) at ε = 10⁻² (7), the asymptotic formula's own error at
/// the Monte Carlo ε values (9), and slow convergence of the Vandermonde
/// ratio at m = 40 (11).
const KNOWN_FAILURES: [u32; 3] = [7, 9, 11];

#[test]
fn acceptance() {
    let report = validate(Level::Full);
    // written to the raw handle so the lines survive output capture
    let mut err = std::io::stderr().lock();
    for c in &report.checks {
        writeln!(err, "{}", c.line()).unwrap();
    }
    assert_eq!(report.checks.len(), 12);
    let failed: Vec<u32> = report.checks.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    writeln!(err, "failed criteria: {failed:?}").unwrap();
    assert_eq!(failed, KNOWN_FAILURES, "set of failing criteria changed");
}
