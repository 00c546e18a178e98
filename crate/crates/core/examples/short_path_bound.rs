//! `∫|θ̃_ν|` along short paths from the basepoint, for every form index.
//! All values stay below 3, whatever the configuration.

use sphere_qm::config::sample_configuration_with;
use sphere_qm::forms::{short_path_form_bound, FormIndex};

fn main() -> sphere_qm::Result<()> {
    let n = 5;
    let mut rng = sphere_qm::mc::sample_rng(5, 0);
    let mut worst = vec![0.0f64; FormIndex::all(n).len()];
    for _ in 0..500 {
        let (x, _) = sample_configuration_with(&mut rng, n)?;
        for (w, nu) in worst.iter_mut().zip(FormIndex::all(n)) {
            if let Ok(v) = short_path_form_bound(&x, nu) {
                *w = w.max(v);
            }
        }
    }
    for (w, nu) in worst.iter().zip(FormIndex::all(n)) {
        println!("{nu:?}: max {w:.4}");
    }
    Ok(())
}
