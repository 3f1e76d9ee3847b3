//! How fast three smoothers damp low and high frequency error.

use fomg::analysis::{run_smoothing_experiment, SmoothingMethod};

fn main() -> fomg::Result<()> {
    let iterations = 6;
    for method in SmoothingMethod::ALL {
        let trace = run_smoothing_experiment(iterations, method, 7)?;
        println!("{method}");
        for i in 1..=iterations {
            let (low, high) = trace.ratios(i);
            println!("  after {i}: low {low:.3}  high {high:.3}");
        }
    }
    Ok(())
}
