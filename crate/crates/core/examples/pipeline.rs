//! Run the whole pipeline on the bundled demo configuration and print the
//! evaluation tables it writes.
//!
//! ```text
//! cargo run --release --example pipeline
//! ```

use std::path::Path;

use hin_embed::cli::{run_pipeline, PipelineConfig};

fn main() -> hin_embed::Result<()> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo/demo.toml");
    let mut config = PipelineConfig::load(&demo)?;
    config.paths.out_dir = std::env::temp_dir().join("hin_pipeline_example");
    let out = run_pipeline(&config)?;
    for table in ["eval/linkpred.tsv", "eval/linkpred_retrained.tsv", "eval/rce.tsv", "pq/report.tsv"] {
        let path = out.join(table);
        let text = std::fs::read_to_string(&path).map_err(|e| hin_embed::Error::io(&path, e))?;
        println!("== {table}\n{text}");
    }
    Ok(())
}
