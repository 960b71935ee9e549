//! Runs the configuration-driven pipeline: ground state, then dielectric tensor, reusing
//! the checkpoint written by the first step.

use std::path::Path;

use hartree_crystal::io::{load_config, run, Command};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/small.toml");
    let cfg = load_config(&path)?;
    let out = std::env::temp_dir().join("hartree-crystal-batch");
    for cmd in [Command::Scf, Command::Dielectric] {
        let m = run(cmd, &cfg, &out).map_err(|e| e.error)?;
        println!(
            "{cmd:?}: checkpoint reused {}, {} files",
            m.checkpoint_reused,
            m.files.len()
        );
        for f in &m.files {
            println!(
                "  {} ({} bytes, sha256 {})",
                f.name,
                f.bytes,
                &f.sha256[..16]
            );
        }
    }
    println!("{}", std::fs::read_to_string(out.join("dielectric.json"))?);
    Ok(())
}
