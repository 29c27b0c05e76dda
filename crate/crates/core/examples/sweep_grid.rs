//! Runs a small sweep and prints the summary table.

use peplift::report::{run_sweep, summary_csv, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config: SweepConfig = serde_json::from_str(
        r#"{
            "cells": [
                {"algorithm": "silver", "sizes": [1, 2, 3, 4]},
                {"algorithm": "gsw", "sizes": [1, 2, 3]},
                {"algorithm": "ogm", "sizes": [4, 16]},
                {"algorithm": "ogmg", "sizes": [4, 16]}
            ],
            "instances": {"count": 3, "rows": 20, "cols": 10, "seed": 1}
        }"#,
    )?;
    let out = std::env::temp_dir().join("peplift_sweep");
    let cells = run_sweep(&config, &out, 4)?;
    print!("{}", summary_csv(&cells));
    println!("wrote {} cell reports to {}", cells.len(), out.display());
    Ok(())
}
