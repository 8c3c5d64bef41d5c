//! Text-completion services behind the generator and judge roles.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod http;
mod synthetic;

pub use http::{HttpBackend, HttpConfig};
pub use synthetic::{
    decode_theta, encode_candidate, synthetic_mutate, JudgeModel, NormalDist, PointwiseRecall,
    SyntheticBackend, SyntheticWorldConfig,
};

pub const GENERATION_TEMPERATURE: f64 = 1.0;
pub const JUDGE_TEMPERATURE: f64 = 0.0;
pub const POINTWISE_TEMPERATURE: f64 = 1.0;

/// Why a call is made. Transports ignore it; the synthetic world uses it to
/// decide how to answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallPurpose {
    Generate,
    Mutate,
    Judge,
    Pointwise,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_prompt: Option<String>,
    pub user_prompt: String,
    pub temperature: f64,
    /// Honored by the synthetic backend only.
    pub seed: Option<u64>,
    pub purpose: CallPurpose,
}

impl CompletionRequest {
    pub fn new(purpose: CallPurpose, system_prompt: Option<String>, user_prompt: String) -> Self {
        let temperature = match purpose {
            CallPurpose::Judge => JUDGE_TEMPERATURE,
            CallPurpose::Pointwise => POINTWISE_TEMPERATURE,
            CallPurpose::Generate | CallPurpose::Mutate | CallPurpose::Refine => {
                GENERATION_TEMPERATURE
            }
        };
        Self {
            system_prompt,
            user_prompt,
            temperature,
            seed: None,
            purpose,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("backend unavailable after {attempts} attempt(s): {message}")]
pub struct BackendError {
    pub message: String,
    pub attempts: u32,
}

/// A generator/judge service. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Replays canned replies in order, then fails. Handy for driving protocol
/// edge cases.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: Mutex<std::collections::VecDeque<Result<String, BackendError>>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(|s| Ok(s.into())).collect()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn push_failure(&self, message: &str) {
        self.replies.lock().expect("poisoned").push_back(Err(BackendError {
            message: message.to_owned(),
            attempts: 1,
        }));
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, _request: &CompletionRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.replies
            .lock()
            .expect("poisoned")
            .pop_front()
            .unwrap_or_else(|| {
                Err(BackendError {
                    message: "script exhausted".into(),
                    attempts: 1,
                })
            })
    }
}

/// Runs `task(0..count)` on up to `limit` worker threads and returns the
/// results in index order, independent of scheduling.
pub fn parallel_map<R, F>(count: usize, limit: usize, task: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    let workers = limit.max(1).min(count);
    if workers <= 1 {
        return (0..count).map(task).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = task(i);
                *slots[i].lock().expect("poisoned") = Some(value);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("poisoned").expect("every slot filled"))
        .collect()
}
