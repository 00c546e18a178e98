//! Closed-form `Sign_{2n}` values of rotational flows, the reference every
//! Monte Carlo estimate in this crate is compared against.

use sphere_qm::flows::RadialProfile;
use sphere_qm::gg::sign_qm_closed_form;

fn main() -> sphere_qm::Result<()> {
    let profiles = [
        ("u", RadialProfile::height()),
        ("two-step", RadialProfile::steps(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.0])),
        ("bump [1, 1.5]", RadialProfile::bump(1.0, 1.5, 1.0)),
        ("constant", RadialProfile::constant(0.5)),
    ];
    println!("{:<14} {:>12} {:>12} {:>12}", "profile", "Sign4", "Sign6", "Sign8");
    for (name, p) in &profiles {
        let v: Vec<f64> = (2..=4).map(|n| sign_qm_closed_form(p, n)).collect::<Result<_, _>>()?;
        println!("{name:<14} {:>12.6} {:>12.6} {:>12.6}", v[0], v[1], v[2]);
    }
    // For ω̃(u) = u and n = 2: (1/1)·∫(u³ - u)u du = -4/15.
    println!("-4/15 = {:.6}", -4.0 / 15.0);
    Ok(())
}
