//! Writes the bundled two-terminal scenario.
//!
//! ```text
//! cargo run -p busnet-core --example write_scenario -- scenarios/two-terminal
//! ```

use std::path::PathBuf;
use std::{env, fs};

use busnet_core::scenario::bundle_files;

fn main() -> std::io::Result<()> {
    let dir = env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("scenarios/two-terminal"));
    for (name, contents) in bundle_files() {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
