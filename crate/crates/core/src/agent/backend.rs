//! Role-tagged completion backends: a deterministic scripted one and an
//! OpenAI-style chat endpoint over HTTP.

use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::design::DesignTask;
use crate::floorplan::FloorplanModel;
use crate::geometry::CanvasGeometry;
use crate::grounding::SetOfMarks;
use crate::planning::{plan_high_level, plan_low_level, steps_to_json, substeps_to_json, GeneralStep, SubStep};
use crate::retrieval::DocChunk;

use super::scripted::{generate_actions, verify_pure, verify_vision, PureEvidence};
use super::{BackendConfig, BackendKind, Role, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint answered with status {0}")]
    Status(u16),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("planner failed: {0}")]
    Planner(String),
    #[error("{0}")]
    Protocol(String),
}

/// Structured inputs behind a prompt. HTTP backends only read the rendered
/// prompt; the scripted backend decides from these.
#[derive(Debug, Clone, Copy)]
pub enum Payload<'a> {
    HighLevel { task: &'a DesignTask, fp: &'a FloorplanModel },
    LowLevel { step: &'a GeneralStep, retrieved: &'a [DocChunk], fp: &'a FloorplanModel, canvas: &'a CanvasGeometry },
    Actions { substep: &'a SubStep, marks: &'a SetOfMarks, retrieved: &'a [DocChunk] },
    VerifyVision { substep: &'a SubStep, screen: &'a SetOfMarks },
    VerifyPure { substep: &'a SubStep, evidence: &'a PureEvidence },
}

pub trait Backend: Send + Sync {
    fn complete(&self, role: Role, prompt: &str, payload: &Payload<'_>) -> Result<String, BackendError>;

    /// Whether `complete` reads the prompt text. Prompt rendering is skipped
    /// otherwise unless a trace is kept.
    fn reads_prompt(&self) -> bool {
        true
    }
}

/// Rule-based stand-in for every role, answering in the same text formats
/// a model would.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedBackend;

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json")
}

impl Backend for ScriptedBackend {
    fn complete(&self, role: Role, _prompt: &str, payload: &Payload<'_>) -> Result<String, BackendError> {
        match (role, payload) {
            (Role::HighLevelPlanner, Payload::HighLevel { task, fp }) => {
                let steps = plan_high_level(task, fp).map_err(|e| BackendError::Planner(e.to_string()))?;
                Ok(pretty(&steps_to_json(&steps)))
            }
            (Role::LowLevelPlanner, Payload::LowLevel { step, retrieved, fp, canvas }) => {
                let subs =
                    plan_low_level(step, retrieved, fp, canvas).map_err(|e| BackendError::Planner(e.to_string()))?;
                Ok(pretty(&substeps_to_json(&subs)))
            }
            (Role::ActionGenerator, Payload::Actions { substep, marks, retrieved }) => {
                let g = match &substep.goal {
                    Some(goal) => generate_actions(goal, marks, retrieved),
                    None => return Err(BackendError::Planner("substep has no goal to act on".into())),
                };
                Ok(pretty(&json!({
                    "action name": substep.description,
                    "actions": g.actions.to_string(),
                    "continue": g.more,
                })))
            }
            (Role::SupervisorVision, Payload::VerifyVision { substep, screen }) => Ok(match &substep.goal {
                Some(goal) => verify_vision(goal, screen),
                None => Verdict::fail("the substep has no checkable goal"),
            }
            .to_response()),
            (Role::SupervisorPure, Payload::VerifyPure { substep, evidence }) => {
                Ok(verify_pure(substep, evidence).to_response())
            }
            (role, _) => Err(BackendError::Protocol(format!("payload does not match role {role:?}"))),
        }
    }

    fn reads_prompt(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpSettings {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub api_key: String,
}

impl std::fmt::Display for HttpSettings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never print the key.
        write!(f, "{} ({}, {:?})", self.endpoint, self.model, self.timeout)
    }
}

fn system_prompt(role: Role) -> &'static str {
    match role {
        Role::HighLevelPlanner => "You are the high-level planner of a BIM modelling agent.",
        Role::LowLevelPlanner => "You are the low-level planner of a BIM modelling agent.",
        Role::ActionGenerator => "You are the action generator of a BIM modelling agent.",
        Role::SupervisorVision | Role::SupervisorPure => "You are the supervisor of a BIM modelling agent.",
    }
}

fn post_once(agent: &ureq::Agent, s: &HttpSettings, body: &str) -> Result<String, BackendError> {
    let mut resp = agent
        .post(&s.endpoint)
        .header("Authorization", &format!("Bearer {}", s.api_key))
        .header("Content-Type", "application/json")
        .send(body)
        .map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            other => BackendError::Transport(other.to_string()),
        })?;
    let status = resp.status().as_u16();
    if status != 200 {
        return Err(BackendError::Status(status));
    }
    resp.body_mut().read_to_string().map_err(|e| match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        other => BackendError::Transport(other.to_string()),
    })
}

/// One chat-completion call. Transport failures and 5xx answers are retried
/// once; the reply is `choices[0].message.content`.
pub fn http_complete(settings: &HttpSettings, role: Role, prompt: &str) -> Result<String, BackendError> {
    let agent: ureq::Agent =
        ureq::Agent::config_builder().timeout_global(Some(settings.timeout)).http_status_as_error(false).build().into();
    let body = json!({
        "model": settings.model,
        "messages": [
            {"role": "system", "content": system_prompt(role)},
            {"role": "user", "content": prompt},
        ],
    })
    .to_string();
    let text = match post_once(&agent, settings, &body) {
        Err(BackendError::Transport(_)) | Err(BackendError::Status(500..=599)) => post_once(&agent, settings, &body)?,
        other => other?,
    };
    let v: Value = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub settings: HttpSettings,
}

impl HttpBackend {
    /// Build from a validated config, reading the key from the named
    /// environment variable.
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let missing = |f: &str| BackendError::Protocol(format!("{f} is required for the HTTP backend"));
        if cfg.kind != BackendKind::Http {
            return Err(BackendError::Protocol("config does not select the HTTP backend".into()));
        }
        let var = cfg.api_key_env.clone().ok_or_else(|| missing("api_key_env"))?;
        let api_key = std::env::var(&var).map_err(|_| BackendError::MissingApiKey(var))?;
        Ok(HttpBackend {
            settings: HttpSettings {
                endpoint: cfg.endpoint.clone().ok_or_else(|| missing("endpoint"))?,
                model: cfg.model.clone().ok_or_else(|| missing("model"))?,
                timeout: Duration::from_secs_f64(cfg.timeout_secs.ok_or_else(|| missing("timeout_secs"))?),
                api_key,
            },
        })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, role: Role, prompt: &str, _payload: &Payload<'_>) -> Result<String, BackendError> {
        http_complete(&self.settings, role, prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serve the given canned (status, body) answers, one per connection,
    /// and report each request body.
    fn stub(answers: Vec<(u16, String)>) -> (String, mpsc::Receiver<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in answers {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line.trim().is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                tx.send(String::from_utf8(buf).unwrap()).ok();
                let mut s = stream;
                write!(s, "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len())
                    .unwrap();
            }
        });
        (url, rx)
    }

    fn settings(endpoint: String) -> HttpSettings {
        HttpSettings { endpoint, model: "m1".into(), timeout: Duration::from_secs(5), api_key: "k".into() }
    }

    fn reply(content: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    #[test]
    fn returns_message_content() {
        let (url, rx) = stub(vec![(200, reply("hello"))]);
        assert_eq!(http_complete(&settings(url), Role::ActionGenerator, "prompt text").unwrap(), "hello");
        let sent: Value = serde_json::from_str(&rx.recv().unwrap()).unwrap();
        assert_eq!(sent["model"], "m1");
        assert_eq!(sent["messages"][1]["content"], "prompt text");
    }

    #[test]
    fn server_error_is_retried_once() {
        let (url, _rx) = stub(vec![(503, String::new()), (200, reply("ok"))]);
        assert_eq!(http_complete(&settings(url), Role::HighLevelPlanner, "p").unwrap(), "ok");
        let (url, _rx) = stub(vec![(500, String::new()), (502, String::new())]);
        assert_eq!(http_complete(&settings(url), Role::HighLevelPlanner, "p"), Err(BackendError::Status(502)));
    }

    #[test]
    fn client_error_and_bad_body() {
        let (url, _rx) = stub(vec![(401, String::new())]);
        assert_eq!(http_complete(&settings(url), Role::SupervisorPure, "p"), Err(BackendError::Status(401)));
        let (url, _rx) = stub(vec![(200, "{}".into())]);
        assert!(matches!(http_complete(&settings(url), Role::SupervisorPure, "p"), Err(BackendError::Malformed(_))));
    }

    #[test]
    fn slow_server_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/x", listener.local_addr().unwrap());
        let hold = std::thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            std::thread::sleep(Duration::from_millis(1500));
            drop(s);
        });
        let mut s = settings(url);
        s.timeout = Duration::from_millis(300);
        assert_eq!(http_complete(&s, Role::ActionGenerator, "p"), Err(BackendError::Timeout));
        hold.join().unwrap();
    }

    #[test]
    fn key_comes_from_named_variable() {
        let cfg = BackendConfig {
            kind: BackendKind::Http,
            endpoint: Some("http://127.0.0.1:9/x".into()),
            model: Some("m".into()),
            timeout_secs: Some(1.0),
            api_key_env: Some("BIMPILOT_TEST_KEY_UNSET".into()),
            seed: 0,
        };
        assert_eq!(
            HttpBackend::from_config(&cfg).unwrap_err(),
            BackendError::MissingApiKey("BIMPILOT_TEST_KEY_UNSET".into())
        );
        let mut s = settings("http://h/x".into());
        s.api_key = "secret-xyz".into();
        assert!(!s.to_string().contains("secret-xyz"));
    }
}
