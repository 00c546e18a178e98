//! The cross-ratio chart of configuration space and its Möbius invariance.

use num_complex::Complex64 as C;
use sphere_qm::sphere::{cross_ratio, moduli_projection, sample_uniform, Mobius, ProjPoint};

fn main() -> sphere_qm::Result<()> {
    let mut rng = sphere_qm::mc::sample_rng(3, 0);
    let x: Vec<ProjPoint> = (0..6).map(|_| sample_uniform(&mut rng)).collect();
    let u = moduli_projection(&x)?;
    println!("cross-ratio coordinates u_k = cr(x1, x2, x3, x_k+3):");
    for (k, z) in u.iter().enumerate() {
        println!("  u_{} = {:+.6} {:+.6}i", k + 1, z.re, z.im);
    }
    let m = Mobius::new(C::new(1.0, 2.0), C::new(-0.5, 0.0), C::new(0.3, -1.0), C::new(2.0, 0.5))?;
    let y: Vec<ProjPoint> = x.iter().map(|p| m.apply(p)).collect();
    let v = moduli_projection(&y)?;
    let drift = u.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("after a Möbius map the coordinates move by at most {drift:.2e}");
    // Repeated points are rejected rather than sent to 0, 1 or ∞.
    match cross_ratio(&x[0], &x[1], &x[2], &x[0]) {
        Ok(c) => println!("cr(x1, x2, x3, x1) = {c}"),
        Err(e) => println!("cr(x1, x2, x3, x1): {e}"),
    }
    Ok(())
}
