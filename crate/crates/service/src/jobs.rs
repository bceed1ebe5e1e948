//! Simulation jobs on a bounded pool of blocking workers.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use dosefind_core::document::{study_document, StudyDocument};
use dosefind_core::sim::{Scenario, SimConfig};
use serde::Serialize;
use tokio::sync::Semaphore;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: Uuid,
    pub status: JobStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub config: SimConfig,
    pub scenarios: Vec<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Arc<StudyDocument>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Jobs {
    jobs: RwLock<HashMap<Uuid, Job>>,
    workers: Arc<Semaphore>,
    max_pending: usize,
}

impl Jobs {
    pub fn new(workers: usize, max_pending: usize) -> Self {
        Self {
            jobs: RwLock::new(HashMap::new()),
            workers: Arc::new(Semaphore::new(workers.max(1))),
            max_pending,
        }
    }

    pub fn get(&self, id: Uuid) -> Option<Job> {
        self.jobs
            .read()
            .expect("job map poisoned")
            .get(&id)
            .cloned()
    }

    fn pending(&self) -> usize {
        self.jobs
            .read()
            .expect("job map poisoned")
            .values()
            .filter(|j| j.status < JobStatus::Done)
            .count()
    }

    fn set(&self, id: Uuid, status: JobStatus, outcome: Option<Result<StudyDocument, String>>) {
        let mut jobs = self.jobs.write().expect("job map poisoned");
        let Some(job) = jobs.get_mut(&id) else { return };
        debug_assert!(status >= job.status);
        job.status = status;
        job.updated_at = Utc::now();
        match outcome {
            Some(Ok(doc)) => job.result = Some(Arc::new(doc)),
            Some(Err(e)) => job.error = Some(e),
            None => {}
        }
    }

    /// Queues a validated study; returns `None` when the queue is full.
    pub fn submit(self: &Arc<Self>, config: SimConfig, scenarios: Vec<Scenario>) -> Option<Job> {
        if self.pending() >= self.max_pending {
            return None;
        }
        let now = Utc::now();
        let job = Job {
            id: Uuid::new_v4(),
            status: JobStatus::Queued,
            created_at: now,
            updated_at: now,
            config,
            scenarios,
            result: None,
            error: None,
        };
        self.jobs
            .write()
            .expect("job map poisoned")
            .insert(job.id, job.clone());
        let jobs = Arc::clone(self);
        let (id, config, scenarios) = (job.id, job.config.clone(), job.scenarios.clone());
        tokio::spawn(async move {
            let Ok(_permit) = jobs.workers.clone().acquire_owned().await else {
                return;
            };
            jobs.set(id, JobStatus::Running, None);
            let run =
                tokio::task::spawn_blocking(move || study_document(&scenarios, &config)).await;
            let (status, outcome) = match run {
                Ok(Ok(doc)) => (JobStatus::Done, Ok(doc)),
                Ok(Err(e)) => (JobStatus::Failed, Err(e.to_string())),
                Err(e) => (JobStatus::Failed, Err(format!("worker crashed: {e}"))),
            };
            if let Err(e) = &outcome {
                tracing::warn!(job = %id, "simulation failed: {e}");
            }
            jobs.set(id, status, Some(outcome));
        });
        Some(job)
    }
}
