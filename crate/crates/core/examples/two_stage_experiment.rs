//! In-domain only vs sampled external only vs both in sequence, on synthetic
//! data. Pass a seed as the first argument.

use punct_restore::desk::{prepare, preset_plans, DeskSetup, PresetRecipe};
use punct_restore::pipeline::run_experiment;

fn main() -> punct_restore::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let dir = std::env::temp_dir().join(format!("punct-desk-{seed}"));
    let mut setup = DeskSetup::default();
    setup.data.seed = seed;
    let files = prepare(&dir, &setup)?;
    println!(
        "sampled {} external lines, {:.1}% from the similar subset (pool: {:.1}%)",
        setup.k,
        100.0 * files.sampled_similar_fraction,
        100.0 * files.pool_similar_fraction
    );

    let mut recipe = PresetRecipe::default();
    recipe.model.seed = seed;
    println!("{:<10} {:>7} {:>7} {:>7}", "plan", "P", "R", "F1");
    for plan in preset_plans(&dir, &recipe) {
        let out = run_experiment(&plan, Some(&dir.join("runs").join(&plan.name)))?;
        let o = out.report.overall;
        println!("{:<10} {:>7.2} {:>7.2} {:>7.2}", plan.name, o.precision, o.recall, o.f1);
    }
    println!("artifacts under {}", dir.join("runs").display());
    Ok(())
}
