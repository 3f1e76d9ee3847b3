//! A small rate table written to disk, as the command-line tool does it.

use fomg::harness::{emit_outputs, run_table, ExperimentConfig};

fn main() -> fomg::Result<()> {
    let cfg = ExperimentConfig::parse(
        "problem = nonquad
         levels = 3..4
         nu = 1, 2
         timing = off
         out = target/example-table",
    )?;
    let run = run_table(&cfg)?;
    for row in run.rows() {
        println!(
            "level {} {:>8}: rate {:>6}, finest evaluations {:>5}",
            row.level,
            row.smoother,
            row.rate.map_or("-".into(), |r| format!("{r:.3}")),
            row.feval_top
        );
    }
    for file in emit_outputs(&cfg.out, "table", &cfg, Some(&run), &[])? {
        println!("wrote {}", file.display());
    }
    Ok(())
}
