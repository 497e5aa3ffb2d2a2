//! Benchmark runner, trace rendering and the plumbing behind the `copcs` command line tool.

pub mod bench;
pub mod error;
pub mod svg;

pub use bench::{mission_label, read_results, run_benchmark, run_benchmark_on, summarize, write_report, BenchMethod, BenchmarkConfig, BenchmarkReport, InstanceRecord, SummaryRow, TimingRecord};
pub use error::{HarnessError, Result};
pub use svg::{export_trace_svg, render_svg};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "COPCS_OUT_DIR";

/// `explicit` if given, else `$COPCS_OUT_DIR/<default_name>`, else `<default_name>`.
pub fn resolve_out(explicit: Option<&std::path::Path>, default_name: &str) -> std::path::PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) => std::path::PathBuf::from(dir).join(default_name),
            None => std::path::PathBuf::from(default_name),
        },
    }
}
