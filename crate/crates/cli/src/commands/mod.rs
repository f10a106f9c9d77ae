mod analyze;
mod evaluate;
mod extract;
mod predict;
mod synth;
mod train;

pub(crate) use extract::{cache_paths, content_hash};

pub use analyze::cmd_analyze;
pub use evaluate::cmd_evaluate;
pub use extract::cmd_extract;
pub use predict::cmd_predict;
pub use synth::cmd_synth_corpus;
pub use train::cmd_train;

use chordrec::Error;

/// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::NonFinite(_) | Error::Train(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}
