//! Process-wide settings read from the environment.

use std::env;

pub const THREADS_VAR: &str = "PSFIELD_THREADS";
pub const DETERMINISTIC_VAR: &str = "PSFIELD_DETERMINISTIC";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Runtime {
    /// Worker threads for per-light and per-point work in `render` and `inspect`.
    pub threads: usize,
    /// When false, an omitted `--seed` is replaced by a fresh random seed.
    pub deterministic: bool,
}

impl Runtime {
    pub fn from_env() -> Result<Self, String> {
        Self::parse(env::var(THREADS_VAR).ok().as_deref(), env::var(DETERMINISTIC_VAR).ok().as_deref())
    }

    pub fn parse(threads: Option<&str>, deterministic: Option<&str>) -> Result<Self, String> {
        let threads = match threads.map(str::trim) {
            None | Some("") => 1,
            Some(t) => match t.parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => return Err(format!("{THREADS_VAR} must be a positive integer, got {t:?}")),
            },
        };
        let deterministic = match deterministic.map(|s| s.trim().to_ascii_lowercase()) {
            None => true,
            Some(s) => match s.as_str() {
                "" | "1" | "true" | "yes" | "on" => true,
                "0" | "false" | "no" | "off" => false,
                _ => return Err(format!("{DETERMINISTIC_VAR} must be 0 or 1, got {s:?}")),
            },
        };
        Ok(Runtime { threads, deterministic })
    }

    /// `explicit` if given, otherwise `default` or a random seed when determinism is off.
    pub fn seed(&self, explicit: Option<u64>, default: u64) -> u64 {
        match explicit {
            Some(s) => s,
            None if self.deterministic => default,
            None => rand::random(),
        }
    }
}
