//! Hook plane: observability, policy gates, and audit for runner actions.
//!
//! Runner vocabulary for the five hook slots:
//!
//! | kind           | fired at                                       | may block |
//! |----------------|------------------------------------------------|-----------|
//! | `PromptSubmit` | campaign/run start                             | yes       |
//! | `PreAction`    | before an externally visible action            | yes       |
//! | `PostAction`   | after an action took effect                    | no        |
//! | `Notification` | informational events (milestones, attempts)    | no        |
//! | `Stop`         | run end                                        | no        |
//!
//! Every `fire` appends one audit record and one event-log line through a
//! single mutex-guarded appender, so sequence numbers are gap-free even with
//! concurrent callers. Policies only observe payloads.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HookError {
    #[error("policy `{policy}` already registered for {kind:?} `{matcher}`")]
    DuplicateRegistration {
        kind: HookEventKind,
        matcher: String,
        policy: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum HookEventKind {
    PromptSubmit,
    PreAction,
    PostAction,
    Notification,
    Stop,
}

impl HookEventKind {
    pub const ALL: [HookEventKind; 5] = [
        HookEventKind::PromptSubmit,
        HookEventKind::PreAction,
        HookEventKind::PostAction,
        HookEventKind::Notification,
        HookEventKind::Stop,
    ];

    pub fn can_block(self) -> bool {
        matches!(self, HookEventKind::PromptSubmit | HookEventKind::PreAction)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Allow,
    Block,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HookDecision {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Policy that produced a block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
}

impl HookDecision {
    pub fn allow() -> Self {
        HookDecision {
            verdict: Verdict::Allow,
            reason: None,
            policy: None,
        }
    }

    pub fn is_block(&self) -> bool {
        self.verdict == Verdict::Block
    }
}

/// Outcome of one policy check. `Err` carries the block reason.
pub type PolicyResult = Result<(), String>;

type PolicyFn = dyn Fn(&str, &Value) -> PolicyResult + Send + Sync;

/// Named predicate over `(action_name, payload)`.
#[derive(Clone)]
pub struct Policy {
    name: String,
    check: Arc<PolicyFn>,
}

impl Policy {
    pub fn new(name: impl Into<String>, check: impl Fn(&str, &Value) -> PolicyResult + Send + Sync + 'static) -> Self {
        Policy {
            name: name.into(),
            check: Arc::new(check),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Blocks everything it is consulted for.
    pub fn always_block(name: impl Into<String>, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        Policy::new(name, move |_, _| Err(reason.clone()))
    }

    /// Blocks payloads whose numeric `field` exceeds `limit` in magnitude.
    pub fn max_abs(name: impl Into<String>, field: &'static str, limit: f64) -> Self {
        Policy::new(name, move |_, payload| match payload.get(field).and_then(Value::as_f64) {
            Some(v) if v.abs() > limit => Err(format!("|{field}| = {} exceeds {limit}", v.abs())),
            _ => Ok(()),
        })
    }
}

impl std::fmt::Debug for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Policy").field("name", &self.name).finish()
    }
}

/// Shell-style glob over action names: `*` matches any run, `?` one character.
pub fn glob_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let n: Vec<char> = name.chars().collect();
    let (mut pi, mut ni) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ni < n.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == n[ni]) {
            pi += 1;
            ni += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ni));
            pi += 1;
        } else if let Some((sp, sn)) = star {
            pi = sp + 1;
            ni = sn + 1;
            star = Some((sp, sn + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|c| *c == '*')
}

#[derive(Debug, Clone)]
struct Registration {
    kind: HookEventKind,
    matcher: String,
    policy: Policy,
}

#[derive(Debug, Clone, Default)]
pub struct HookRegistry {
    regs: Vec<Registration>,
}

impl HookRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, kind: HookEventKind, matcher: impl Into<String>, policy: Policy) -> Result<(), HookError> {
        let matcher = matcher.into();
        if self
            .regs
            .iter()
            .any(|r| r.kind == kind && r.matcher == matcher && r.policy.name == policy.name)
        {
            return Err(HookError::DuplicateRegistration {
                kind,
                matcher,
                policy: policy.name,
            });
        }
        self.regs.push(Registration { kind, matcher, policy });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.regs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regs.is_empty()
    }

    /// Evaluates matching policies in registration order without recording anything.
    pub fn evaluate(&self, kind: HookEventKind, action: &str, payload: &Value) -> HookDecision {
        if !kind.can_block() {
            return HookDecision::allow();
        }
        for r in self.regs.iter().filter(|r| r.kind == kind && glob_match(&r.matcher, action)) {
            let outcome = catch_unwind(AssertUnwindSafe(|| (r.policy.check)(action, payload)));
            let reason = match outcome {
                Ok(Ok(())) => continue,
                Ok(Err(reason)) => reason,
                Err(panic) => {
                    let msg = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    format!("policy failed: {msg}")
                }
            };
            return HookDecision {
                verdict: Verdict::Block,
                reason: Some(reason),
                policy: Some(r.policy.name.clone()),
            };
        }
        HookDecision::allow()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRecord {
    pub seq: u64,
    /// Seconds on the caller-supplied clock.
    pub t_wall: f64,
    pub kind: HookEventKind,
    pub action_name: String,
    pub payload_digest: String,
    pub decision: HookDecision,
}

/// One line of the hook event log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HookEventLine {
    pub seq: u64,
    pub kind: HookEventKind,
    pub action: String,
    pub digest: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// SHA-256 hex of the canonical serialization (object keys sorted, no whitespace).
pub fn payload_digest(payload: &Value) -> String {
    let bytes = serde_json::to_vec(payload).expect("Value serialization is infallible");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Default)]
struct Journal {
    audit: Vec<AuditRecord>,
    events: Vec<HookEventLine>,
}

/// A sealed registry plus its append-only journal.
#[derive(Debug)]
pub struct HookPlane {
    registry: HookRegistry,
    journal: Mutex<Journal>,
}

impl HookPlane {
    pub fn new(registry: HookRegistry) -> Self {
        HookPlane {
            registry,
            journal: Mutex::new(Journal::default()),
        }
    }

    pub fn registry(&self) -> &HookRegistry {
        &self.registry
    }

    pub fn fire(&self, kind: HookEventKind, action: &str, payload: &Value, t_wall: f64) -> HookDecision {
        let digest = payload_digest(payload);
        let decision = self.registry.evaluate(kind, action, payload);
        let mut j = self.journal.lock().unwrap_or_else(|e| e.into_inner());
        let seq = j.audit.len() as u64;
        j.events.push(HookEventLine {
            seq,
            kind,
            action: action.to_string(),
            digest: digest.clone(),
            verdict: decision.verdict,
            reason: decision.reason.clone(),
        });
        j.audit.push(AuditRecord {
            seq,
            t_wall,
            kind,
            action_name: action.to_string(),
            payload_digest: digest,
            decision: decision.clone(),
        });
        decision
    }

    pub fn audit_log(&self) -> Vec<AuditRecord> {
        self.journal.lock().unwrap_or_else(|e| e.into_inner()).audit.clone()
    }

    pub fn event_log(&self) -> Vec<HookEventLine> {
        self.journal.lock().unwrap_or_else(|e| e.into_inner()).events.clone()
    }

    pub fn fire_count(&self) -> usize {
        self.journal.lock().unwrap_or_else(|e| e.into_inner()).audit.len()
    }

    pub fn into_logs(self) -> (Vec<AuditRecord>, Vec<HookEventLine>) {
        let j = self.journal.into_inner().unwrap_or_else(|e| e.into_inner());
        (j.audit, j.events)
    }
}
