//! Truncated against plain cycles on the spiral problem.

use fomg::harness::{run_truncation_comparison, ExperimentConfig};

fn main() -> fomg::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.set("levels", "5")?;
    let cmp = run_truncation_comparison(&cfg)?;
    println!("level {}, GP-{}", cmp.level, cmp.nu);
    let n = cmp.truncated.errors.len().max(cmp.plain.errors.len());
    for t in 0..n.min(12) {
        let show = |e: Option<&f64>| e.map_or("-".to_string(), |e| format!("{:>7.2}", e.log10()));
        println!(
            "cycle {t:>2}: log10 error truncated {}  plain {}",
            show(cmp.truncated.errors.get(t)),
            show(cmp.plain.errors.get(t))
        );
    }
    Ok(())
}
