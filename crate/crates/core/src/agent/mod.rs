//! Orchestration of planner, action generator and supervisor around the
//! mock environment, behind one role-tagged backend interface.

mod backend;
mod parse;
mod prompts;
mod run;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::ActionScript;

pub use backend::{http_complete, Backend, BackendError, HttpBackend, HttpSettings, Payload, ScriptedBackend};
pub use parse::{parse_action_response, parse_plan_response, parse_supervisor_response, ParseError, PlanResponse};
pub use prompts::{render_prompt, template, PromptError, PromptVars, PLACEHOLDERS};
pub use run::{
    fault_for_rate, fault_seed, perceive_floorplan, run_substep_with_reflection, run_task, ConfigEcho, Interaction,
    LogEntry, RunConfig, RunContext, RunReport, SubstepOutcome, SubtaskTally, TaskRun, TaskRunError, TaskTrace,
    MAX_GROUNDING_ROUNDS,
};
pub use scripted::{generate_actions, read_org_rows, verify_pure, verify_vision, Generated, PureEvidence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    HighLevelPlanner,
    LowLevelPlanner,
    ActionGenerator,
    SupervisorVision,
    SupervisorPure,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::HighLevelPlanner,
        Role::LowLevelPlanner,
        Role::ActionGenerator,
        Role::SupervisorVision,
        Role::SupervisorPure,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approval {
    Success,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub approved: Approval,
    pub reasons: String,
    pub corrected_actions: Option<ActionScript>,
}

impl Verdict {
    pub fn success() -> Self {
        Verdict { approved: Approval::Success, reasons: "success".into(), corrected_actions: None }
    }

    pub fn fail(reasons: impl Into<String>) -> Self {
        Verdict { approved: Approval::Fail, reasons: reasons.into(), corrected_actions: None }
    }

    pub fn is_success(&self) -> bool {
        self.approved == Approval::Success
    }

    /// The response text a supervisor would send for this verdict.
    pub fn to_response(&self) -> String {
        let mut s = format!(
            "approved_value:\n{}\n\nreasons:\n{}\n",
            if self.is_success() { "success" } else { "fail" },
            self.reasons
        );
        if let Some(a) = &self.corrected_actions {
            let obj = serde_json::json!({ "action name": "corrected", "actions": a.to_string() });
            s.push_str(&format!("\nactions:\n{}\n", serde_json::to_string_pretty(&obj).expect("json")));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts_per_substep: u32,
    pub max_total_retries_per_task: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts_per_substep: 3, max_total_retries_per_task: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("max_attempts_per_substep must be at least 1")]
    ZeroAttempts,
    #[error("{0} is required for the HTTP backend")]
    MissingHttpField(&'static str),
    #[error("{0} is only valid for the HTTP backend")]
    UnexpectedHttpField(&'static str),
    #[error("timeout must be positive")]
    BadTimeout,
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_attempts_per_substep == 0 {
            return Err(ConfigError::ZeroAttempts);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Http,
}

/// Backend selection. The API key is never stored here, only the name of
/// the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub timeout_secs: Option<f64>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            endpoint: None,
            model: None,
            timeout_secs: None,
            api_key_env: None,
            seed: 0,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields: [(&'static str, bool); 4] = [
            ("endpoint", self.endpoint.is_some()),
            ("model", self.model.is_some()),
            ("timeout_secs", self.timeout_secs.is_some()),
            ("api_key_env", self.api_key_env.is_some()),
        ];
        for (name, present) in fields {
            match (self.kind, present) {
                (BackendKind::Http, false) => return Err(ConfigError::MissingHttpField(name)),
                (BackendKind::Scripted, true) => return Err(ConfigError::UnexpectedHttpField(name)),
                _ => {}
            }
        }
        if self.timeout_secs.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err(ConfigError::BadTimeout);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationConfig {
    #[serde(default)]
    pub disable_dynamic_grounding: bool,
    #[serde(default)]
    pub disable_supervision: bool,
    #[serde(default)]
    pub disable_hierarchy: bool,
}

impl AblationConfig {
    pub const NONE: AblationConfig =
        AblationConfig { disable_dynamic_grounding: false, disable_supervision: false, disable_hierarchy: false };

    /// Comma-separated names: `grounding`, `supervision`, `hierarchy`.
    pub fn parse_list(s: &str) -> Result<Self, String> {
        let mut a = AblationConfig::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "grounding" => a.disable_dynamic_grounding = true,
                "supervision" => a.disable_supervision = true,
                "hierarchy" => a.disable_hierarchy = true,
                other => return Err(format!("unknown ablation {other:?}")),
            }
        }
        Ok(a)
    }

    pub fn label(&self) -> String {
        let mut v = Vec::new();
        if self.disable_dynamic_grounding {
            v.push("grounding");
        }
        if self.disable_supervision {
            v.push("supervision");
        }
        if self.disable_hierarchy {
            v.push("hierarchy");
        }
        if v.is_empty() {
            "full".into()
        } else {
            format!("w/o {}", v.join("+"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorClass {
    Planning,
    Grounding,
    Execution,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 3] = [ErrorClass::Planning, ErrorClass::Grounding, ErrorClass::Execution];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    /// `"step 3 / sub_step_2"`, or a plan-level location.
    pub substep: String,
    pub class: ErrorClass,
    pub reason: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_config_fields_follow_kind() {
        assert_eq!(BackendConfig::default().validate(), Ok(()));
        let http = BackendConfig {
            kind: BackendKind::Http,
            endpoint: Some("http://localhost:1/v1/chat/completions".into()),
            model: Some("m".into()),
            timeout_secs: Some(5.0),
            api_key_env: Some("KEY".into()),
            seed: 0,
        };
        assert_eq!(http.validate(), Ok(()));
        assert_eq!(
            BackendConfig { model: None, ..http.clone() }.validate(),
            Err(ConfigError::MissingHttpField("model"))
        );
        assert_eq!(
            BackendConfig { kind: BackendKind::Scripted, ..http }.validate(),
            Err(ConfigError::UnexpectedHttpField("endpoint"))
        );
    }

    #[test]
    fn ablation_lists() {
        let a = AblationConfig::parse_list("grounding, hierarchy").unwrap();
        assert!(a.disable_dynamic_grounding && a.disable_hierarchy && !a.disable_supervision);
        assert_eq!(AblationConfig::parse_list("").unwrap(), AblationConfig::NONE);
        assert!(AblationConfig::parse_list("memory").is_err());
        assert_eq!(a.label(), "w/o grounding+hierarchy");
    }

    #[test]
    fn retry_policy_bounds() {
        assert!(RetryPolicy::default().validate().is_ok());
        assert!(RetryPolicy { max_attempts_per_substep: 0, ..Default::default() }.validate().is_err());
    }
}
