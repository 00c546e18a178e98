//! `L^p` lengths of a random time-dependent Hamiltonian flow. With common
//! spatial samples the estimates are ordered like power means.

use sphere_qm::flows::{lp_length, rotational_l1, FlowSpec, HamiltonianGrid, RadialProfile};

fn main() -> sphere_qm::Result<()> {
    let grid = HamiltonianGrid::random(4, 12, 24, 4, 1.0);
    let flow = FlowSpec::Hamiltonian { grid, duration: 1.0 };
    for p in [1.0, 1.5, 2.0, 3.0] {
        let l = lp_length(&flow, p, 40, 2000, 9)?;
        println!("l_{p:<3} = {:.4} ± {:.4}", l.value, l.stderr);
    }
    let profile = RadialProfile::height();
    let rot = FlowSpec::rotational(profile.clone(), 1.0);
    let mc = lp_length(&rot, 1.0, 40, 20000, 9)?;
    println!("rotation by u: l_1 = {:.4} ± {:.4} (quadrature {:.4})", mc.value, mc.stderr, rotational_l1(&profile, 1.0));
    Ok(())
}
