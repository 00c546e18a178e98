//! Link invariants of braid closures: Seifert and Goeritz signatures side by
//! side, then the invariant table with the homogenized quasimorphism.

use sphere_qm::braids::BraidWord;
use sphere_qm::conventions::conventions;
use sphere_qm::invariants::{closure_signature, goeritz_signature, invariant_table_csv, Shading};

fn main() -> sphere_qm::Result<()> {
    let words: Vec<BraidWord> = ["2: 1 1 1", "2: 1 1", "3: 1 -2 1 -2", "3: 1 2 1 2 1 2", "4: 1 2 3 1 2 3 1 2 3 1 2 3"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    println!("{:<28} {:>8} {:>8} {:>8}", "closure of", "seifert", "goeritz", "goeritz'");
    for w in &words {
        println!(
            "{:<28} {:>8} {:>8} {:>8}",
            w.to_string(),
            closure_signature(w),
            goeritz_signature(w, Shading::OddGaps),
            goeritz_signature(w, Shading::EvenGaps)
        );
    }
    let pure: Vec<BraidWord> = words.into_iter().filter(BraidWord::is_pure).collect();
    print!("\n{}", invariant_table_csv(&pure, conventions().homogenization_depth)?);
    Ok(())
}
