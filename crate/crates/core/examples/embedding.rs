//! A `d`-dimensional family of rotational flows on which the `Sign`
//! quasimorphisms are linearly independent, and its dual basis `Φ_i`.
//! Usage: `embedding [samples]`; with samples > 0 the dual basis is checked
//! by Monte Carlo.

use sphere_qm::acceptance::{sign_options, SIGN_POWER};
use sphere_qm::gg::{build_embedding, embedding_phi_estimates};

fn main() -> sphere_qm::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = build_embedding(2, 1)?;
    println!("Sign_(2n)(f_j), rows n = 2, 3:");
    for row in &spec.matrix {
        println!("  {row:?}");
    }
    println!("condition number {:.1}", spec.condition);
    println!("Φ coefficients:");
    for row in &spec.coefficients {
        println!("  {row:?}");
    }
    for j in 0..spec.d {
        if samples == 0 {
            break;
        }
        let est = embedding_phi_estimates(&spec, j, 1.0, samples, 1 + j as u64, &sign_options(SIGN_POWER))?;
        for (i, e) in est.iter().enumerate() {
            println!("Φ{}(f{}) = {:.3} ± {:.3}", i + 1, j + 1, e.mean, e.stderr);
        }
    }
    Ok(())
}
