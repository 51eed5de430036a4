use std::fmt;
use std::process::ExitCode;

/// A failed run: one machine-parsable stderr line and an exit code.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    msg: String,
    code: u8,
}

pub const CONFIG: u8 = 2;
pub const INPUT: u8 = 3;
pub const FLATNESS: u8 = 4;
const INTERNAL: u8 = 1;

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure { kind: "config", msg: msg.into(), code: CONFIG }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Failure { kind: "input", msg: msg.into(), code: INPUT }
    }

    pub fn output(path: &std::path::Path, err: impl fmt::Display) -> Self {
        Failure { kind: "output", msg: format!("{}: {err}", path.display()), code: INTERNAL }
    }

    pub fn flatness(msg: impl Into<String>) -> Self {
        Failure { kind: "coherence", msg: msg.into(), code: FLATNESS }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Failure { kind: "usage", msg: msg.into(), code: CONFIG }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: kind={} msg={:?}", self.kind, self.msg)
    }
}

impl From<reifen::Error> for Failure {
    fn from(e: reifen::Error) -> Self {
        use reifen::Error as E;
        let code = match &e {
            E::InvalidParameter(_) => CONFIG,
            E::Input(_) | E::DimensionMismatch { .. } | E::Json(_) | E::Io(_) | E::Degenerate(_) => INPUT,
            E::FlatnessAbort { .. } => FLATNESS,
            _ => INTERNAL,
        };
        Failure { kind: e.kind(), msg: e.to_string(), code }
    }
}
