//! Output envelopes, input readers, config merging and the error type that
//! maps onto exit codes.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use tiereval_core::adaptive::{AdaptiveError, PresetError};
use tiereval_core::btm::BtmError;
use tiereval_core::corpus::{CorpusError, Manifest};
use tiereval_core::evalkit::EvalError;
use tiereval_core::hls::HlsError;
use tiereval_core::responses::ResponseError;
use tiereval_core::simlab::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Display) -> Self {
        CliError {
            kind: Kind::Validation,
            message: message.to_string(),
        }
    }

    pub fn runtime(message: impl Display) -> Self {
        CliError {
            kind: Kind::Runtime,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => 2,
            Kind::Runtime => 3,
        }
    }

    /// Prefixes the message with the file or flag it concerns.
    pub fn context(mut self, what: impl Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub type CliResult<T> = Result<T, CliError>;

macro_rules! classify {
    ($($ty:ty => $io:pat),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                if matches!(e, $io) {
                    CliError::runtime(e)
                } else {
                    CliError::validation(e)
                }
            }
        })*
    };
}

classify! {
    CorpusError => CorpusError::Io { .. },
    ResponseError => ResponseError::Io(_),
    PresetError => PresetError::Io(_),
    SimError => SimError::Io { .. },
    BtmError => BtmError::Io(_),
}

macro_rules! always_validation {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::validation(e)
            }
        })*
    };
}

always_validation!(HlsError, EvalError, AdaptiveError);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub flags: Value,
    pub seed: Option<u64>,
}

impl Header {
    pub fn new(subcommand: &str, flags: &impl Serialize, seed: Option<u64>) -> Self {
        Header {
            tool: "tiereval".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            flags: serde_json::to_value(flags).expect("flags serialize"),
            seed,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    header: &'a Header,
    body: &'a T,
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::runtime(e).context(parent.display()))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::runtime(e).context(path.display()))
}

pub fn write_json(path: &Path, header: &Header, body: &impl Serialize) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(&Envelope { header, body }).expect("body serializes");
    text.push('\n');
    write_text(path, &text)
}

/// `out.json` → `out.csv`; `out.json` + suffix `easy` → `out.easy.csv`.
pub fn sibling_csv(out: &Path, suffix: Option<&str>) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match suffix {
        Some(s) => format!("{stem}.{s}.csv"),
        None => format!("{stem}.csv"),
    };
    out.with_file_name(name)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::runtime(e).context(path.display()))
}

/// Reads a JSON document, unwrapping the `body` of an envelope if present.
pub fn read_body<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::validation(format!("line {}: {e}", e.line())).context(path.display())
    })?;
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key("header") && obj.contains_key("body") {
            value = obj.remove("body").unwrap();
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::validation(e).context(path.display()))
}

pub fn load_manifest(path: &Path) -> CliResult<Manifest> {
    tiereval_core::corpus::load_manifest(path)
        .map_err(|e| CliError::from(e).context(path.display()))
}

pub fn read_config(path: &Path) -> CliResult<Map<String, Value>> {
    let text = read_text(path)?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::validation("config must be a JSON object").context(path.display())),
        Err(e) => Err(CliError::validation(e).context(path.display())),
    }
}

/// Fills every flag left unset on the command line (null or empty list) from
/// the config object. Keys may be written with `_` or `-`.
pub fn merge_config<T: Serialize + DeserializeOwned>(
    args: &T,
    config: &Map<String, Value>,
) -> CliResult<T> {
    let mut value = serde_json::to_value(args).expect("args serialize");
    if let Some(obj) = value.as_object_mut() {
        for (key, slot) in obj.iter_mut() {
            let unset = slot.is_null() || slot.as_array().is_some_and(|a| a.is_empty());
            if !unset {
                continue;
            }
            if let Some(v) = config
                .get(key)
                .or_else(|| config.get(&key.replace('_', "-")))
            {
                *slot = v.clone();
            }
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::validation(e).context("config"))
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::validation(format!("missing required flag --{flag}")))
}

pub fn required_list<T: Clone>(value: &[T], flag: &str) -> CliResult<Vec<T>> {
    if value.is_empty() {
        Err(CliError::validation(format!(
            "missing required flag --{flag}"
        )))
    } else {
        Ok(value.to_vec())
    }
}
