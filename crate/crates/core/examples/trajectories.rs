//! Single-point trajectories under a rotational and a Hamiltonian flow.

use sphere_qm::flows::{default_dt, evolve, FlowSpec, HamiltonianGrid, RadialProfile};
use sphere_qm::sphere::ProjPoint;

fn main() -> sphere_qm::Result<()> {
    let start = ProjPoint::from_unit_vector([0.6, 0.0, 0.8]);
    let flows = [
        ("rotation", FlowSpec::rotational(RadialProfile::height(), 1.0)),
        ("hamiltonian", FlowSpec::Hamiltonian { grid: HamiltonianGrid::random(2, 12, 24, 4, 1.0), duration: 1.0 }),
    ];
    for (name, flow) in &flows {
        let path = evolve(flow, &start, 0.0, 1.0, 0.25)?;
        println!("{name} (integrator step {:.0e}):", default_dt(flow));
        for (k, p) in path.iter().enumerate() {
            let v = p.to_unit_vector();
            println!("  t={:.2}  ({:+.4}, {:+.4}, {:+.4})  height {:+.4}", 0.25 * k as f64, v[0], v[1], v[2], p.height());
        }
    }
    Ok(())
}
