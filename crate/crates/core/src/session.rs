//! Chart sessions: a chart state that successive queries manipulate in place.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::chart::{ChartSpec, ChartState};
use crate::exec::{self, ExecError, Keyframe};
use crate::manip::ManipStep;
use crate::plan::{plan, PlanError, PlanPolicy};
use crate::task::{parse_task_text, serialize_task};
use crate::translate::{QueryContext, Span, TranslateError, Translator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Translate,
    Plan,
    Execute,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("translation failed: {0}")]
    Translate(#[from] TranslateError),
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
    #[error("execution failed: {0}")]
    Execute(#[from] ExecError),
    #[error("corrupt history entry {index}: {message}")]
    History { index: usize, message: String },
}

impl SessionError {
    /// The query stage that failed, if the error came from one.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            SessionError::Translate(_) => Some(Stage::Translate),
            SessionError::Plan(_) => Some(Stage::Plan),
            SessionError::Execute(_) => Some(Stage::Execute),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HistoryEntry {
    #[serde(rename_all = "camelCase")]
    Query {
        query: String,
        task: String,
        plan: Vec<ManipStep>,
        keyframe_count: usize,
        state_hash: String,
        timestamp: DateTime<Utc>,
    },
    #[serde(rename_all = "camelCase")]
    Reset {
        state_hash: String,
        timestamp: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryOutcome {
    pub task: String,
    pub spans: std::collections::BTreeMap<String, Span>,
    pub plan: Vec<ManipStep>,
    pub keyframes: Vec<Keyframe>,
    pub state_hash: String,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub initial: ChartState,
    pub state: ChartState,
    pub history: Vec<HistoryEntry>,
    pub policy: PlanPolicy,
}

impl Session {
    pub fn new(id: impl Into<String>, spec: Arc<ChartSpec>, policy: PlanPolicy) -> Self {
        let initial = ChartState::initial(spec);
        Session {
            id: id.into(),
            state: initial.clone(),
            initial,
            history: Vec::new(),
            policy,
        }
    }

    /// Translate, plan and execute `query`. The state and history change
    /// only when every stage succeeds.
    pub fn query(&mut self, query: &str, translator: &dyn Translator) -> Result<QueryOutcome, SessionError> {
        let report = translator.translate(query, &QueryContext::for_state(&self.state))?;
        let steps = plan(&report.task, &self.state, &self.policy)?;
        let keyframes = exec::apply_all(&steps, &self.state)?;
        let last = keyframes.last().expect("initial frame").state.clone();
        let outcome = QueryOutcome {
            task: serialize_task(&report.task),
            spans: report.spans,
            plan: steps.clone(),
            state_hash: last.state_hash(),
            keyframes,
        };
        self.history.push(HistoryEntry::Query {
            query: query.to_string(),
            task: outcome.task.clone(),
            plan: steps,
            keyframe_count: outcome.keyframes.len(),
            state_hash: outcome.state_hash.clone(),
            timestamp: Utc::now(),
        });
        self.state = last;
        Ok(outcome)
    }

    pub fn reset(&mut self) -> String {
        self.state = self.initial.clone();
        let state_hash = self.state.state_hash();
        self.history.push(HistoryEntry::Reset {
            state_hash: state_hash.clone(),
            timestamp: Utc::now(),
        });
        state_hash
    }

    /// Rebuild the current state from the initial one by re-applying every
    /// recorded plan, checking each recorded hash on the way.
    pub fn replay(&self) -> Result<ChartState, SessionError> {
        replay_history(&self.initial, &self.history)
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            spec: self.initial.spec.to_json(),
            policy: self.policy.clone(),
            history: self.history.clone(),
            state_hash: self.state.state_hash(),
        }
    }
}

fn replay_history(initial: &ChartState, history: &[HistoryEntry]) -> Result<ChartState, SessionError> {
    let mut state = initial.clone();
    for (index, entry) in history.iter().enumerate() {
        let expected = match entry {
            HistoryEntry::Reset { state_hash, .. } => {
                state = initial.clone();
                state_hash
            }
            HistoryEntry::Query {
                plan, state_hash, task, ..
            } => {
                parse_task_text(task).map_err(|e| SessionError::History {
                    index,
                    message: e.to_string(),
                })?;
                state = exec::replay(plan, &state)?.pop().expect("initial state");
                state_hash
            }
        };
        if state.state_hash() != *expected {
            return Err(SessionError::History {
                index,
                message: "replayed state differs from the recorded one".into(),
            });
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSnapshot {
    pub id: String,
    pub spec: serde_json::Value,
    pub policy: PlanPolicy,
    pub history: Vec<HistoryEntry>,
    pub state_hash: String,
}

impl SessionSnapshot {
    pub fn restore(&self) -> Result<Session, SessionError> {
        let spec = ChartSpec::from_json(self.spec.clone()).map_err(|e| SessionError::History {
            index: 0,
            message: e.to_string(),
        })?;
        let mut s = Session::new(self.id.clone(), Arc::new(spec), self.policy.clone());
        s.state = replay_history(&s.initial, &self.history)?;
        s.history = self.history.clone();
        Ok(s)
    }
}

struct Slot {
    session: Arc<Mutex<Session>>,
    last_used: u64,
}

struct Inner {
    slots: HashMap<String, Slot>,
    tick: u64,
    next_id: u64,
}

/// Sessions by id, evicting the least recently used beyond `capacity`.
/// Each session has its own lock, so queries on one session are serialised
/// while different sessions proceed in parallel.
pub struct SessionStore {
    capacity: usize,
    policy: PlanPolicy,
    inner: Mutex<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl SessionStore {
    pub fn new(capacity: usize, policy: PlanPolicy) -> Self {
        SessionStore {
            capacity: capacity.max(1),
            policy,
            inner: Mutex::new(Inner {
                slots: HashMap::new(),
                tick: 0,
                next_id: 1,
            }),
        }
    }

    pub fn len(&self) -> usize {
        lock(&self.inner).slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, spec: Arc<ChartSpec>) -> String {
        let mut inner = lock(&self.inner);
        let id = format!("s{:06}-{:08x}", inner.next_id, rand::random::<u32>());
        inner.next_id += 1;
        let session = Session::new(id.clone(), spec, self.policy.clone());
        self.insert(&mut inner, session);
        id
    }

    pub fn restore(&self, snapshot: &SessionSnapshot) -> Result<String, SessionError> {
        let session = snapshot.restore()?;
        let id = session.id.clone();
        self.insert(&mut lock(&self.inner), session);
        Ok(id)
    }

    fn insert(&self, inner: &mut Inner, session: Session) {
        inner.tick += 1;
        let slot = Slot {
            session: Arc::new(Mutex::new(session)),
            last_used: inner.tick,
        };
        let id = lock(&slot.session).id.clone();
        inner.slots.insert(id, slot);
        while inner.slots.len() > self.capacity {
            let oldest = inner
                .slots
                .iter()
                .min_by_key(|(_, s)| s.last_used)
                .map(|(k, _)| k.clone())
                .expect("nonempty");
            inner.slots.remove(&oldest);
        }
    }

    /// Run `f` on the session under its lock.
    pub fn with<R>(&self, id: &str, f: impl FnOnce(&mut Session) -> R) -> Result<R, SessionError> {
        let session = {
            let mut inner = lock(&self.inner);
            inner.tick += 1;
            let tick = inner.tick;
            let slot = inner
                .slots
                .get_mut(id)
                .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
            slot.last_used = tick;
            slot.session.clone()
        };
        let mut guard = lock(&session);
        Ok(f(&mut guard))
    }

    pub fn query(&self, id: &str, query: &str, translator: &dyn Translator) -> Result<QueryOutcome, SessionError> {
        self.with(id, |s| s.query(query, translator))?
    }

    pub fn reset(&self, id: &str) -> Result<String, SessionError> {
        self.with(id, Session::reset)
    }

    pub fn history(&self, id: &str) -> Result<Vec<HistoryEntry>, SessionError> {
        self.with(id, |s| s.history.clone())
    }

    pub fn snapshot(&self, id: &str) -> Result<SessionSnapshot, SessionError> {
        self.with(id, |s| s.snapshot())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{covid_spec, energy_spec};
    use crate::translate::RulesTranslator;

    #[test]
    fn failing_query_leaves_session_untouched() {
        let mut s = Session::new("a", Arc::new(energy_spec()), PlanPolicy::default());
        let tr = RulesTranslator::default();
        s.query("What is the consumption of coal in 2022?", &tr).unwrap();
        let before = (s.state.state_hash(), s.history.len());
        let err = s.query("Coal, please.", &tr).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Translate));
        let err = s.query("What is the consumption of coal in 1990?", &tr).unwrap_err();
        assert!(matches!(err.stage(), Some(Stage::Plan | Stage::Execute)), "{err}");
        assert_eq!((s.state.state_hash(), s.history.len()), before);
    }

    #[test]
    fn replay_and_snapshot_reproduce_the_state() {
        let mut s = Session::new("b", Arc::new(covid_spec()), PlanPolicy::default());
        let tr = RulesTranslator::default();
        s.query("What is the growth of the daily new cases of Germany?", &tr)
            .unwrap();
        s.query("When is the highest value of that growth?", &tr).unwrap();
        s.reset();
        s.query(
            "What is the trend of the daily new cases of India from Mar 1, 2021 to Jun 1, 2021?",
            &tr,
        )
        .unwrap();
        assert_eq!(s.replay().unwrap(), s.state);
        let snap: SessionSnapshot = serde_json::from_str(&serde_json::to_string(&s.snapshot()).unwrap()).unwrap();
        let back = snap.restore().unwrap();
        assert_eq!(back.state.state_hash(), s.state.state_hash());
        assert_eq!(back.history, s.history);
    }

    #[test]
    fn store_evicts_least_recently_used() {
        let store = SessionStore::new(2, PlanPolicy::default());
        let spec = Arc::new(energy_spec());
        let a = store.create(spec.clone());
        let b = store.create(spec.clone());
        store.reset(&a).unwrap();
        let c = store.create(spec);
        assert_eq!(store.len(), 2);
        assert!(matches!(store.history(&b), Err(SessionError::UnknownSession(_))));
        assert_eq!(store.history(&a).unwrap().len(), 1);
        assert!(store.history(&c).unwrap().is_empty());
    }
}
