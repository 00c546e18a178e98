//! Running a manifest in-process, as the `sphere-qm` binary does.

use sphere_qm::cli::{execute, record};
use sphere_qm::manifest::{Command, ExperimentManifest};

fn main() -> sphere_qm::Result<()> {
    let m: ExperimentManifest = serde_json::from_str(
        r#"{
            "command": "closed-form",
            "flow": {"kind": "rotational", "duration": 2.0,
                     "profile": {"form": "height_polynomial", "coefficients": [0.0, 1.0]}},
            "options": {"ns": [2, 3, 4]}
        }"#,
    )?;
    assert_eq!(m.command, Command::ClosedForm);
    let out = execute(&m, 0)?;
    print!("{}", out.table.to_csv()?);
    let rec = record(&m, &m.cache_key(), &out.result);
    println!("record keys: {:?}", rec.as_object().map(|o| o.keys().collect::<Vec<_>>()));
    Ok(())
}
