//! Loading a JSON run configuration and running it without the binary.

use relkepler::cli::cmd_simulate;
use relkepler::cli::config::RunConfig;

fn main() -> relkepler::error::Result<()> {
    let text = r#"{
        "schema_version": 1,
        "model": { "kind": "family", "family": "levi_civita", "h": -0.05 },
        "params": { "G": 1.0, "M": 1.0, "m": 1.0, "c": 20.0 },
        "initial": { "x": [1.0, 0.0], "v": [0.0, 1.2] },
        "orbits": 4,
        "output": { "plots": ["x_y"] }
    }"#;
    let config = RunConfig::from_json(text)?;
    let out = std::env::temp_dir().join("relkepler-run-config");
    let report = cmd_simulate(&config, &out)?;
    println!("wrote {}", out.display());
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
