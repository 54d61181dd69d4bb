//! `E Tr(A_{t*})` stays of order n along the localization.

use locball::analysis::guan_trace_check;
use locball::{Backend, LogConcaveFamily};

fn main() -> locball::Result<()> {
    for family in LogConcaveFamily::zoo(4) {
        let r = guan_trace_check(&family, 0.5, 1e-2, 32, Backend::preferred(&family), 10_000, 4)?;
        println!(
            "{:<16} E Tr(A)/n = {:.4} ± {:.4} (failed paths {})",
            r.family,
            r.mean_trace / 4.0,
            r.stderr / 4.0,
            r.failed_paths
        );
    }
    Ok(())
}
