//! Status records for asynchronous avatar and chapter generation.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::backend::ImageRef;
use crate::ids::{JobId, SessionId};
use crate::narrative::ChapterIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Avatar,
    Chapter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JobResult {
    Avatar { avatar: ImageRef },
    Segment { chapter: ChapterIndex },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Done { result: JobResult },
    Failed { error: String, message: String },
}

impl JobState {
    fn order(&self) -> u8 {
        match self {
            JobState::Pending => 0,
            JobState::Running => 1,
            JobState::Done { .. } | JobState::Failed { .. } => 2,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.order() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: JobId,
    pub session_id: SessionId,
    pub kind: JobKind,
    #[serde(flatten)]
    pub state: JobState,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
}

/// In-memory job table. State only ever moves forward.
#[derive(Debug, Default)]
pub struct JobRegistry {
    jobs: Mutex<HashMap<JobId, JobStatus>>,
}

impl JobRegistry {
    pub fn create(&self, job_id: JobId, session_id: SessionId, kind: JobKind) -> JobStatus {
        let status = JobStatus {
            job_id: job_id.clone(),
            session_id,
            kind,
            state: JobState::Pending,
            started_at: None,
            finished_at: None,
        };
        self.jobs.lock().expect("job table poisoned").insert(job_id, status.clone());
        status
    }

    pub fn get(&self, job_id: &JobId) -> Option<JobStatus> {
        self.jobs.lock().expect("job table poisoned").get(job_id).cloned()
    }

    /// Moves a job forward; returns false (and changes nothing) for unknown
    /// jobs or backward moves.
    pub fn advance(&self, job_id: &JobId, state: JobState, at: DateTime<Utc>) -> bool {
        let mut jobs = self.jobs.lock().expect("job table poisoned");
        let Some(job) = jobs.get_mut(job_id) else {
            return false;
        };
        if state.order() <= job.state.order() {
            return false;
        }
        if job.started_at.is_none() {
            job.started_at = Some(at);
        }
        if state.is_terminal() {
            job.finished_at = Some(at);
        }
        job.state = state;
        true
    }

    /// Jobs that have not reached a terminal state.
    pub fn unfinished(&self) -> Vec<JobId> {
        let jobs = self.jobs.lock().expect("job table poisoned");
        let mut ids: Vec<_> = jobs
            .values()
            .filter(|j| !j.state.is_terminal())
            .map(|j| j.job_id.clone())
            .collect();
        ids.sort();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::FixedClock;

    #[test]
    fn states_only_move_forward() {
        let now = FixedClock::default().0;
        let registry = JobRegistry::default();
        let id = JobId::from("job-1");
        registry.create(id.clone(), SessionId::from("s"), JobKind::Chapter);
        assert!(registry.advance(&id, JobState::Running, now));
        assert!(!registry.advance(&id, JobState::Pending, now));
        let done = JobState::Done {
            result: JobResult::Segment {
                chapter: ChapterIndex::FIRST,
            },
        };
        assert!(registry.advance(&id, done.clone(), now));
        assert!(!registry.advance(
            &id,
            JobState::Failed {
                error: "Shutdown".into(),
                message: String::new()
            },
            now
        ));
        let status = registry.get(&id).unwrap();
        assert_eq!(status.state, done);
        assert_eq!(status.finished_at, Some(now));
        assert!(registry.unfinished().is_empty());
    }

    #[test]
    fn wire_shape() {
        let status = JobStatus {
            job_id: JobId::from("job-1"),
            session_id: SessionId::from("s"),
            kind: JobKind::Avatar,
            state: JobState::Failed {
                error: "Timeout".into(),
                message: "slow".into(),
            },
            started_at: None,
            finished_at: None,
        };
        let json = serde_json::to_value(&status).unwrap();
        assert_eq!(json["state"], "failed");
        assert_eq!(json["error"], "Timeout");
        assert_eq!(json["kind"], "avatar");
    }
}
