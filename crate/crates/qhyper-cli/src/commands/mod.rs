pub mod check;
pub mod eval;
pub mod measure;

use serde_json::Value;

/// What a subcommand hands back to `main`: a JSON report, its text rendering
/// and the tolerance verdict that decides between exit codes 0 and 1.
#[derive(Debug)]
pub struct RunReport {
    pub json: Value,
    pub text: String,
    pub passed: bool,
}
