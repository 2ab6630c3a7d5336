//! Identifiers, capability tokens and the service clock.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_string())
            }
        }
    };
}

string_id!(SessionId);
string_id!(
    /// Participant ids are scoped to their session (`p1`, `p2`, ...).
    ParticipantId
);
string_id!(JobId);

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock frozen at one instant. Event ordering then relies on sequence
/// numbers alone, which keeps exports byte-reproducible.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Default for FixedClock {
    fn default() -> Self {
        Self(Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap())
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

pub trait IdSource: Send + Sync {
    fn session_id(&self) -> SessionId;
    fn job_id(&self) -> JobId;
    fn token(&self) -> String;
}

#[derive(Debug, Default)]
pub struct RandomIds;

impl IdSource for RandomIds {
    fn session_id(&self) -> SessionId {
        SessionId(uuid::Uuid::new_v4().to_string())
    }

    fn job_id(&self) -> JobId {
        JobId(uuid::Uuid::new_v4().to_string())
    }

    fn token(&self) -> String {
        uuid::Uuid::new_v4().simple().to_string()
    }
}

/// Counter-based ids for reproducible runs. Tokens stay random since they
/// never reach an export.
#[derive(Debug, Default)]
pub struct SequentialIds {
    sessions: AtomicU64,
    jobs: AtomicU64,
}

impl IdSource for SequentialIds {
    fn session_id(&self) -> SessionId {
        let n = self.sessions.fetch_add(1, Ordering::Relaxed) + 1;
        SessionId(format!("session-{n:06}"))
    }

    fn job_id(&self) -> JobId {
        let n = self.jobs.fetch_add(1, Ordering::Relaxed) + 1;
        JobId(format!("job-{n:06}"))
    }

    fn token(&self) -> String {
        uuid::Uuid::new_v4().simple().to_string()
    }
}
