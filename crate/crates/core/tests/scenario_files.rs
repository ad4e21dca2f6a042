use std::fs;
use std::path::Path;

use busnet_core::scenario::bundle_files;

#[test]
fn committed_scenario_matches_generator() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/two-terminal");
    for (name, expected) in bundle_files() {
        let got = fs::read_to_string(dir.join(&name))
            .unwrap_or_else(|e| panic!("{name}: {e}; regenerate with the write_scenario example"));
        assert!(got == expected, "{name} differs from the generator output");
    }
}
