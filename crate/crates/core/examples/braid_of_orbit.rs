//! Braid words of loops: an explicit two-strand orbit, then a loop traced
//! from a random configuration under a rotational flow.

use num_complex::Complex64 as C;
use sphere_qm::braids::{choose_direction, extract_braid, planarize, PlanarLoop};
use sphere_qm::config::{basepoint, sample_configuration, trace_loop, PathSystem};
use sphere_qm::flows::{default_dt, FlowSpec, RadialProfile};
use sphere_qm::mc::sample_rng;

fn main() -> sphere_qm::Result<()> {
    // Two points swapping places twice: one full turn about each other.
    let k = 64;
    let orbit = (0..=k)
        .map(|s| {
            let z = C::from_polar(0.5, 2.0 * std::f64::consts::PI * s as f64 / k as f64);
            vec![z, -z]
        })
        .collect();
    let planar = PlanarLoop::from_points(orbit)?;
    let d = extract_braid(&planar, 0.3)?;
    println!("orbit: {}  (winding {:.3})", d.word, planar.winding(0, 1));

    let flow = FlowSpec::rotational(RadialProfile::height(), 2.0);
    let x = sample_configuration(5, 11)?;
    let lp = trace_loop(&flow, &x, &basepoint(5, 0), PathSystem::Geodesic, default_dt(&flow))?;
    let planar = planarize(&lp)?;
    let (theta, d) = choose_direction(&planar, 7.0, &mut sample_rng(11, 1))?;
    println!("traced loop, {} samples, direction {theta:.4}:", lp.params.len());
    println!("  {}  (pure: {}, {} crossings)", d.word, d.word.is_pure(), d.events.len());
    Ok(())
}
