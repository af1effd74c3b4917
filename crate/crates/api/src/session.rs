//! In-memory suggestion sessions keyed by the `x-session-id` header.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use planmine_core::CandidateId;

pub const SESSION_HEADER: &str = "x-session-id";

#[derive(Debug, Default)]
pub struct SessionState {
    /// Candidates already suggested in this session.
    pub shown: HashSet<CandidateId>,
    last_seen: Option<Instant>,
}

#[derive(Debug)]
pub struct Sessions {
    ttl: Duration,
    map: Mutex<HashMap<String, SessionState>>,
}

impl Sessions {
    pub fn new(ttl: Duration) -> Self {
        Sessions { ttl, map: Mutex::new(HashMap::new()) }
    }

    /// Runs `f` on the session's state, creating it when `id` is absent,
    /// unknown or expired. Returns the id actually used.
    pub fn with<T>(&self, id: Option<&str>, f: impl FnOnce(&mut SessionState) -> T) -> (String, T) {
        let now = Instant::now();
        let mut map = self.map.lock().unwrap_or_else(|p| p.into_inner());
        map.retain(|_, s| s.last_seen.is_none_or(|t| now.duration_since(t) < self.ttl));
        let key = match id {
            Some(k) if !k.is_empty() => k.to_string(),
            _ => uuid::Uuid::new_v4().to_string(),
        };
        let state = map.entry(key.clone()).or_default();
        state.last_seen = Some(now);
        let out = f(state);
        (key, out)
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
