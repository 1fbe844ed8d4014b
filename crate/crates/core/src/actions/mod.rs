//! Low-level action vocabulary, script grammar, and speculative execution.

mod grammar;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::canonical::{to_canonical, Fnv64};
use crate::env::{EnvFlag, EnvState, InputEvent};
use crate::geometry::GuiPoint;

pub use grammar::{normalize_combo, parse_script, serialize_action, serialize_script, ScriptError, ScriptErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveMouseTo { x: i32, y: i32 },
    LeftClick,
    TypeName(String),
    PressEscape,
    PressEnter,
    Shortcut(String),
    SelectAll,
}

impl Action {
    /// Input events this action expands to.
    pub fn expand(&self) -> Vec<InputEvent> {
        vec![match self {
            Action::MoveMouseTo { x, y } => InputEvent::MouseMove(GuiPoint::new(*x, *y)),
            Action::LeftClick => InputEvent::LeftClick,
            Action::TypeName(t) => InputEvent::KeyText(t.clone()),
            Action::PressEscape => InputEvent::KeyEscape,
            Action::PressEnter => InputEvent::KeyEnter,
            Action::Shortcut(c) => InputEvent::KeyCombo(c.clone()),
            Action::SelectAll => InputEvent::SelectAll,
        }]
    }
}

/// An ordered list of actions, optionally remembering the text it came from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ActionScript {
    pub actions: Vec<Action>,
    #[serde(skip)]
    pub source_text: Option<String>,
}

impl ActionScript {
    pub fn new(actions: Vec<Action>) -> Self {
        ActionScript { actions, source_text: None }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

// Structural equality: the source text is provenance, not content.
impl PartialEq for ActionScript {
    fn eq(&self, other: &Self) -> bool {
        self.actions == other.actions
    }
}

impl Eq for ActionScript {}

impl std::fmt::Display for ActionScript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serialize_script(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: usize,
    pub action: Action,
    pub pre_frame: u64,
    pub post_frame: u64,
    pub flags: Vec<EnvFlag>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub entries: Vec<TraceEntry>,
    pub duration_secs: f64,
}

impl ExecutionTrace {
    pub fn flags(&self) -> impl Iterator<Item = &EnvFlag> {
        self.entries.iter().flat_map(|e| &e.flags)
    }

    pub fn has_fault(&self) -> bool {
        self.flags().any(EnvFlag::is_fault)
    }

    /// Hash of everything but the timing.
    pub fn hash(&self) -> u64 {
        Fnv64::hash_bytes(&to_canonical(&self.entries))
    }
}

/// Observation points around each executed action.
pub trait ExecutionHooks {
    fn before(&mut self, _index: usize, _action: &Action, _env: &EnvState) {}
    fn after(&mut self, _entry: &TraceEntry, _env: &EnvState) {}
}

pub struct NoHooks;

impl ExecutionHooks for NoHooks {}

/// Run every action back-to-back against `env`. Anomalies end up as flags in
/// the trace; execution itself never fails.
pub fn execute_script(script: &ActionScript, env: &mut EnvState, hooks: &mut dyn ExecutionHooks) -> ExecutionTrace {
    let started = Instant::now();
    let mut entries = Vec::with_capacity(script.len());
    for (index, action) in script.actions.iter().enumerate() {
        hooks.before(index, action, env);
        let pre_frame = env.frame_fingerprint();
        let seen = env.flags.len();
        for ev in action.expand() {
            env.apply_event(&ev);
        }
        let entry = TraceEntry {
            index,
            action: action.clone(),
            pre_frame,
            post_frame: env.frame_fingerprint(),
            flags: env.flags[seen..].to_vec(),
        };
        hooks.after(&entry, env);
        entries.push(entry);
    }
    ExecutionTrace { entries, duration_secs: started.elapsed().as_secs_f64() }
}
