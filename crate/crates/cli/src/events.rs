//! Diagnostics as one JSON object per line on standard error.

use serde_json::{json, Value};
use std::io::Write;

#[derive(Debug, Clone, Copy, Default)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn emit(&self, event: &str, data: Value) {
        if self.quiet {
            return;
        }
        let mut obj = json!({ "event": event });
        if let (Some(o), Value::Object(d)) = (obj.as_object_mut(), data) {
            o.extend(d);
        }
        let line = serde_json::to_string(&obj).expect("json values serialise");
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }
}
