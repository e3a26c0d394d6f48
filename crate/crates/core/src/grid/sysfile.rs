//! Reading and writing system description files.
//!
//! The format is TOML: top-level scalars for the base quantities and one
//! array of tables per device class (`[[bus]]`, `[[branch]]`, `[[machine]]`,
//! `[[governor]]`, `[[load]]`) plus optional `[wind]` and `[agc]` tables.

use std::path::Path;

use super::SystemModel;
use crate::error::{Error, Result};

const WSCC9: &str = include_str!("../../data/wscc9.sys");

/// The shipped WSCC 9-bus case.
pub fn wscc9() -> SystemModel {
    parse_system(WSCC9, "wscc9.sys").expect("shipped wscc9.sys is valid")
}

pub fn load_system(path: impl AsRef<Path>) -> Result<SystemModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_system(&text, &path.display().to_string())
}

pub fn parse_system(text: &str, origin: &str) -> Result<SystemModel> {
    let sys: SystemModel = toml::from_str(text).map_err(|e| toml_error(e, text, origin))?;
    sys.validate()?;
    Ok(sys)
}

pub fn write_system(sys: &SystemModel) -> String {
    toml::to_string(sys).expect("system model serialises to TOML")
}

/// Converts a TOML deserialisation error into [`Error::Parse`] with a
/// 1-based line number and the offending key where one can be identified.
pub(crate) fn toml_error(err: toml::de::Error, text: &str, origin: &str) -> Error {
    let line = err
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    let message = err.message().trim().to_string();
    let field = field_from_message(&message)
        .or_else(|| {
            let l = text.lines().nth(line.saturating_sub(1))?;
            let key = l.split('=').next()?.trim();
            (!key.is_empty() && !key.starts_with('[')).then(|| key.to_string())
        })
        .unwrap_or_default();
    Error::Parse {
        path: origin.to_string(),
        line,
        field,
        message,
    }
}

fn field_from_message(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}
