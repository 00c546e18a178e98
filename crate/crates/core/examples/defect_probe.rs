//! Homogeneity on commuting flows: the estimate of a product of two
//! rotations against the sum of the estimates of its factors.

use sphere_qm::acceptance::{sign_options, SIGN_POWER};
use sphere_qm::flows::{FlowSpec, RadialProfile};
use sphere_qm::gg::{qm_defect_probe, BaseInvariant};

fn main() -> sphere_qm::Result<()> {
    let phi = FlowSpec::rotational(RadialProfile::height(), 1.0);
    let psi = FlowSpec::rotational(RadialProfile::bump(1.0, 1.5, 1.0), 1.0);
    let report = qm_defect_probe(BaseInvariant::SRaw, 4, &[(phi, psi)], 300, 5, &sign_options(SIGN_POWER))?;
    for e in &report.entries {
        println!("product {:.4}, factors {:.4} + {:.4}", e.product, e.first, e.second);
        println!("defect {:.4} ± {:.4}", e.defect, e.stderr);
    }
    Ok(())
}
