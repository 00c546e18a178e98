//! The co-area identity: averaged over projection directions, the number of
//! crossings between two strands equals the total variation of their
//! relative angle.

use sphere_qm::braids::{crossing_counts, planarize};
use sphere_qm::config::{basepoint, sample_configuration, trace_loop, PathSystem};
use sphere_qm::flows::{FlowSpec, RadialProfile};
use std::f64::consts::PI;

fn main() -> sphere_qm::Result<()> {
    let flow = FlowSpec::rotational(RadialProfile::height(), 2.0);
    let x = sample_configuration(5, 21)?;
    let lp = trace_loop(&flow, &x, &basepoint(5, 0), PathSystem::Geodesic, 1e-3)?;
    let planar = planarize(&lp)?;
    let m = planar.strands();
    let dirs = 1024;
    let mut sum = vec![vec![0.0; m]; m];
    let mut used = 0;
    for k in 0..dirs {
        if let Ok(c) = crossing_counts(&planar, 2.0 * PI * (k as f64 + 0.5) / dirs as f64) {
            used += 1;
            for i in 0..m {
                for j in 0..m {
                    sum[i][j] += c[i][j] as f64;
                }
            }
        }
    }
    println!("pair   mean n_ij   ∫|θ'_ij|");
    for i in 0..m {
        for j in (i + 1)..m {
            println!("{i},{j}   {:>9.4}   {:>8.4}", sum[i][j] / used as f64, planar.abs_winding(i, j));
        }
    }
    Ok(())
}
