//! Average word length of traced braids against the `l_1` length of the flow,
//! for an autonomous rotation run for longer and longer times.

use sphere_qm::flows::{FlowSpec, RadialProfile};
use sphere_qm::gg::{word_norm_report, EstimateOptions};

fn main() -> sphere_qm::Result<()> {
    println!("{:>4} {:>8} {:>14} {:>8}", "t", "l1", "W'", "W'/l1");
    for t in [1.0, 2.0, 5.0, 10.0, 20.0] {
        let flow = FlowSpec::rotational(RadialProfile::height(), t);
        let r = word_norm_report(&flow, 4, 200, 3, 4.0, &EstimateOptions::default())?;
        let w = r.word_norm;
        println!("{t:>4} {:>8.3} {:>7.3} ± {:<5.3} {:>8.3}", r.l1, w.mean, w.stderr, w.mean / r.l1);
    }
    Ok(())
}
