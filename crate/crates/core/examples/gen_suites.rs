//! Regenerates the bundled scenario suites.
//!
//! `cargo run -p mlai-core --example gen_suites -- <scenarios dir>`

use std::path::PathBuf;

use mlai_core::sim::{generate_suite, SuiteKind, BUNDLED_ADVERSARIAL_COUNT, BUNDLED_CLEAN_COUNT, BUNDLED_SUITE_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    for (kind, dir, count) in [
        (SuiteKind::Adversarial, "reid_suite", BUNDLED_ADVERSARIAL_COUNT),
        (SuiteKind::Clean, "reid_suite_clean", BUNDLED_CLEAN_COUNT),
    ] {
        let dir = root.join(dir);
        std::fs::create_dir_all(&dir)?;
        for scn in generate_suite(kind, BUNDLED_SUITE_SEED, count) {
            std::fs::write(dir.join(format!("{}.toml", scn.name)), scn.to_toml())?;
        }
        println!("wrote {count} scenarios to {}", dir.display());
    }
    Ok(())
}
