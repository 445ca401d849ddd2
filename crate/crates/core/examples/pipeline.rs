//! Run the bundled demo configuration end to end, exactly as
//! `canopy-delta pipeline --config fixtures/demo/demo.toml` would.
//!
//!     cargo run --example pipeline [-- OUT_DIR]

use std::path::Path;

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/demo.toml");
    let tmp = tempfile::tempdir().expect("temp dir");
    let out = std::env::args_os().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().join("report"));

    let argv = ["canopy-delta".as_ref(), "pipeline".as_ref(), "--config".as_ref(), config.as_os_str(), "--out".as_ref(), out.as_os_str()];
    let code = canopy_delta::cli::run(argv.map(std::ffi::OsStr::to_os_string));
    if code != 0 {
        std::process::exit(code);
    }
    let summary = std::fs::read_to_string(out.join("change/summary.md")).expect("summary");
    println!("{summary}");
}
