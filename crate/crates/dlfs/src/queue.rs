//! Asynchronous task distribution with atomic claims and lease recovery.
//!
//! Tasks are JSON payloads stored in the shared key/value substrate, one
//! record per task. Workers race on `claim`; a compare-and-swap on the
//! serialized record guarantees at most one winner. A running task whose
//! lease expires becomes claimable again, so a crashed worker cannot
//! strand work. Retries return a task to pending until its attempt budget
//! is exhausted, after which it fails terminally.

use std::sync::{Arc, Mutex};

use crate::kv::KvMap;

pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;
pub const DEFAULT_LEASE_SECONDS: f64 = 60.0;

const TASK_PREFIX: &str = "task:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Pending,
    Running,
    Done,
    Failed,
}

impl TaskState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, TaskState::Done | TaskState::Failed)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskState::Pending => "pending",
            TaskState::Running => "running",
            TaskState::Done => "done",
            TaskState::Failed => "failed",
        }
    }
}

/// How a worker settles a claimed task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Retry,
    Failed,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Done => "done",
            Outcome::Retry => "retry",
            Outcome::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Outcome> {
        match s {
            "done" => Some(Outcome::Done),
            "retry" => Some(Outcome::Retry),
            "failed" => Some(Outcome::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Task {
    pub id: String,
    pub kind: String,
    pub payload: serde_json::Value,
    pub state: TaskState,
    pub attempts: u32,
    pub max_attempts: u32,
    #[serde(default)]
    pub worker: Option<String>,
    #[serde(default)]
    pub lease_expiry: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QueueStats {
    pub pending: u64,
    pub running: u64,
    pub done: u64,
    pub failed: u64,
}

impl QueueStats {
    pub fn total(&self) -> u64 {
        self.pending + self.running + self.done + self.failed
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QueueError {
    #[error("duplicate task id: {0}")]
    Duplicate(String),
    #[error("no such task: {0}")]
    NotFound(String),
    #[error("task {0} is not running (state {1})")]
    NotRunning(String, &'static str),
    #[error("payload is not valid JSON: {0}")]
    BadPayload(String),
    #[error("queue backend: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, QueueError>;

pub fn error_code(err: &QueueError) -> &'static str {
    match err {
        QueueError::Duplicate(_) => "DUPLICATE",
        QueueError::NotFound(_) => "NOTFOUND",
        QueueError::NotRunning(..) => "NOTRUNNING",
        QueueError::BadPayload(_) => "BADPAYLOAD",
        QueueError::Backend(_) => "INTERNAL",
    }
}

pub fn error_from_code(code: &str, detail: &str) -> QueueError {
    match code {
        "DUPLICATE" => QueueError::Duplicate(detail.to_string()),
        "NOTFOUND" => QueueError::NotFound(detail.to_string()),
        "NOTRUNNING" => QueueError::NotRunning(detail.to_string(), "unknown"),
        "BADPAYLOAD" => QueueError::BadPayload(detail.to_string()),
        _ => QueueError::Backend(format!("{code} {detail}")),
    }
}

/// Clock the lease logic runs against. Tests drive a manual clock; the
/// server uses wall time.
pub trait Clock: Send + Sync {
    fn now_seconds(&self) -> f64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_seconds(&self) -> f64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    }
}

/// Manually advanced clock for deterministic lease tests.
#[derive(Default)]
pub struct ManualClock {
    seconds: Mutex<f64>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, seconds: f64) {
        *self.seconds.lock().expect("clock lock") += seconds;
    }
}

impl Clock for ManualClock {
    fn now_seconds(&self) -> f64 {
        *self.seconds.lock().expect("clock lock")
    }
}

/// The broker interface, shared by the embedded queue and the wire client.
pub trait TaskBroker: Send + Sync {
    /// Add a pending task. Errors on a duplicate id or non-JSON payload.
    fn enqueue(&self, id: &str, kind: &str, payload: &str, max_attempts: u32) -> Result<()>;
    /// Atomically claim one pending (or lease-expired) task.
    fn claim(&self, worker: &str) -> Result<Option<Task>>;
    /// Move a running task to its next state; returns the resulting state.
    fn settle(&self, id: &str, outcome: Outcome) -> Result<TaskState>;
    fn stats(&self) -> Result<QueueStats>;
}

impl<B: TaskBroker + ?Sized> TaskBroker for Arc<B> {
    fn enqueue(&self, id: &str, kind: &str, payload: &str, max_attempts: u32) -> Result<()> {
        (**self).enqueue(id, kind, payload, max_attempts)
    }
    fn claim(&self, worker: &str) -> Result<Option<Task>> {
        (**self).claim(worker)
    }
    fn settle(&self, id: &str, outcome: Outcome) -> Result<TaskState> {
        (**self).settle(id, outcome)
    }
    fn stats(&self) -> Result<QueueStats> {
        (**self).stats()
    }
}

/// Embedded queue over a [`KvMap`].
pub struct TaskQueue {
    kv: KvMap,
    clock: Arc<dyn Clock>,
    lease_seconds: f64,
}

impl TaskQueue {
    pub fn new(clock: Arc<dyn Clock>, lease_seconds: f64) -> Self {
        TaskQueue {
            kv: KvMap::new(),
            clock,
            lease_seconds,
        }
    }

    pub fn with_defaults() -> Self {
        Self::new(Arc::new(SystemClock), DEFAULT_LEASE_SECONDS)
    }

    fn task_key(id: &str) -> String {
        format!("{TASK_PREFIX}{id}")
    }

    fn encode(task: &Task) -> String {
        serde_json::to_string(task).expect("task serializes")
    }

    fn decode(raw: &str) -> Result<Task> {
        serde_json::from_str(raw).map_err(|e| QueueError::Backend(format!("corrupt task record: {e}")))
    }

    pub fn get(&self, id: &str) -> Result<Task> {
        let raw = self
            .kv
            .get(&Self::task_key(id))
            .ok_or_else(|| QueueError::NotFound(id.to_string()))?;
        Self::decode(&raw)
    }
}

impl TaskBroker for TaskQueue {
    fn enqueue(&self, id: &str, kind: &str, payload: &str, max_attempts: u32) -> Result<()> {
        let payload: serde_json::Value =
            serde_json::from_str(payload).map_err(|e| QueueError::BadPayload(e.to_string()))?;
        let task = Task {
            id: id.to_string(),
            kind: kind.to_string(),
            payload,
            state: TaskState::Pending,
            attempts: 0,
            max_attempts: max_attempts.max(1),
            worker: None,
            lease_expiry: 0.0,
        };
        if !self.kv.set_if_absent(&Self::task_key(id), &Self::encode(&task)) {
            return Err(QueueError::Duplicate(id.to_string()));
        }
        Ok(())
    }

    fn claim(&self, worker: &str) -> Result<Option<Task>> {
        let now = self.clock.now_seconds();
        for (key, raw) in self.kv.scan_prefix(TASK_PREFIX) {
            let task = Self::decode(&raw)?;
            match task.state {
                TaskState::Pending => {
                    let mut claimed = task.clone();
                    claimed.state = TaskState::Running;
                    claimed.attempts += 1;
                    claimed.worker = Some(worker.to_string());
                    claimed.lease_expiry = now + self.lease_seconds;
                    if self.kv.compare_and_swap(&key, &raw, &Self::encode(&claimed)) {
                        return Ok(Some(claimed));
                    }
                    // Lost the race; some other worker holds it now.
                }
                TaskState::Running if task.lease_expiry < now => {
                    // The holder is presumed dead. The expired attempt is
                    // spent; fail the task if the budget is gone, otherwise
                    // steal the claim in a single swap.
                    let mut next = task.clone();
                    if task.attempts >= task.max_attempts {
                        next.state = TaskState::Failed;
                        next.worker = None;
                        self.kv.compare_and_swap(&key, &raw, &Self::encode(&next));
                        continue;
                    }
                    next.attempts += 1;
                    next.worker = Some(worker.to_string());
                    next.lease_expiry = now + self.lease_seconds;
                    if self.kv.compare_and_swap(&key, &raw, &Self::encode(&next)) {
                        return Ok(Some(next));
                    }
                }
                _ => {}
            }
        }
        Ok(None)
    }

    fn settle(&self, id: &str, outcome: Outcome) -> Result<TaskState> {
        let key = Self::task_key(id);
        let raw = self
            .kv
            .get(&key)
            .ok_or_else(|| QueueError::NotFound(id.to_string()))?;
        let task = Self::decode(&raw)?;
        if task.state != TaskState::Running {
            return Err(QueueError::NotRunning(id.to_string(), task.state.as_str()));
        }
        let mut next = task.clone();
        next.worker = None;
        next.lease_expiry = 0.0;
        next.state = match outcome {
            Outcome::Done => TaskState::Done,
            Outcome::Failed => TaskState::Failed,
            Outcome::Retry if task.attempts >= task.max_attempts => TaskState::Failed,
            Outcome::Retry => TaskState::Pending,
        };
        if !self.kv.compare_and_swap(&key, &raw, &Self::encode(&next)) {
            // Someone stole an expired lease between the read and the swap.
            let current = self.get(id)?;
            return Err(QueueError::NotRunning(id.to_string(), current.state.as_str()));
        }
        Ok(next.state)
    }

    fn stats(&self) -> Result<QueueStats> {
        let mut stats = QueueStats::default();
        for (_, raw) in self.kv.scan_prefix(TASK_PREFIX) {
            match Self::decode(&raw)?.state {
                TaskState::Pending => stats.pending += 1,
                TaskState::Running => stats.running += 1,
                TaskState::Done => stats.done += 1,
                TaskState::Failed => stats.failed += 1,
            }
        }
        Ok(stats)
    }
}

/// Run claim/settle worker loops until the queue is drained.
///
/// Spawns `concurrency` threads; each loops claiming tasks and settling
/// them with the handler's outcome. A thread exits once no pending or
/// running work remains. Returns the number of tasks this call settled.
pub fn drain<B, F>(broker: &B, concurrency: usize, worker_prefix: &str, handler: F) -> Result<u64>
where
    B: TaskBroker + Clone + Send + 'static,
    F: Fn(&Task) -> Outcome + Send + Sync + 'static,
{
    let handler = Arc::new(handler);
    let settled = Arc::new(Mutex::new(0u64));
    let mut threads = Vec::new();
    for w in 0..concurrency.max(1) {
        let broker = broker.clone();
        let handler = Arc::clone(&handler);
        let settled = Arc::clone(&settled);
        let worker_id = format!("{worker_prefix}{w}");
        threads.push(std::thread::spawn(move || -> Result<()> {
            loop {
                match broker.claim(&worker_id)? {
                    Some(task) => {
                        let outcome = handler(&task);
                        match broker.settle(&task.id, outcome) {
                            Ok(_) => *settled.lock().expect("settled lock") += 1,
                            // A stolen lease means another worker owns the
                            // task now; its settle counts, not ours.
                            Err(QueueError::NotRunning(..)) => {}
                            Err(e) => return Err(e),
                        }
                    }
                    None => {
                        let stats = broker.stats()?;
                        if stats.pending == 0 && stats.running == 0 {
                            return Ok(());
                        }
                        std::thread::yield_now();
                    }
                }
            }
        }));
    }
    for t in threads {
        t.join().map_err(|_| QueueError::Backend("worker panicked".into()))??;
    }
    let n = *settled.lock().expect("settled lock");
    Ok(n)
}
