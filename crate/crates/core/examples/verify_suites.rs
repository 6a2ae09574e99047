//! Run the built-in verification suites and summarise them.

use leafwise::config::{Overrides, Workspace};
use leafwise::verify::{run_suite, SUITES};

fn main() -> leafwise::Result<()> {
    let ws = Workspace::canonical(&Overrides::default())?;
    let wanted: Vec<String> = std::env::args().skip(1).collect();
    for suite in SUITES.iter().filter(|s| wanted.is_empty() || wanted.iter().any(|w| w == *s)) {
        let started = std::time::Instant::now();
        let checks = run_suite(suite, &ws)?;
        let failed = checks.iter().filter(|c| !c.passed()).count();
        println!("{suite:<14} {:>2} checks, {failed} failed, {:.2}s", checks.len(), started.elapsed().as_secs_f64());
        for c in checks.iter().filter(|c| !c.passed()) {
            println!("  {} measured {:e} (tolerance {:e}) {}", c.check, c.measured, c.tolerance, c.detail.as_deref().unwrap_or(""));
        }
    }
    Ok(())
}
