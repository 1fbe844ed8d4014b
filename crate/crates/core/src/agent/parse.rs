//! Strict parsers for backend responses. Anything outside the requested
//! shape, including commentary around it, is rejected with a path.

use serde_json::{Map, Value};
use thiserror::Error;

use super::{Approval, Role, Verdict};
use crate::actions::{parse_script, ActionScript};
use crate::geometry::GuiPoint;
use crate::planning::{GeneralStep, StepClass, SubGoal, SubStep, SubStepKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ParseError {
    pub path: String,
    pub message: String,
}

fn err<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { path: path.into(), message: message.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanResponse {
    Steps(Vec<GeneralStep>),
    SubSteps(Vec<SubStep>),
}

fn object(text: &str) -> Result<Map<String, Value>, ParseError> {
    let t = text.trim();
    if !t.starts_with('{') {
        return err("$", "response must be a single JSON object");
    }
    match serde_json::from_str::<Value>(t) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => err("$", "response must be a single JSON object"),
        Err(e) => err("$", e.to_string()),
    }
}

type Numbered<'a> = Vec<(String, &'a Map<String, Value>)>;

/// Keys `"<prefix>N"` numbered 1..=n without gaps, in numeric order.
fn numbered<'a>(m: &'a Map<String, Value>, prefix: &str) -> Result<Numbered<'a>, ParseError> {
    let mut items = Vec::new();
    for (k, v) in m {
        let Some(n) = k.strip_prefix(prefix).and_then(|n| n.parse::<usize>().ok()) else {
            return err(k.clone(), format!("expected a key of the form \"{prefix}N\""));
        };
        let Value::Object(o) = v else {
            return err(k.clone(), "expected an object");
        };
        items.push((n, k.clone(), o));
    }
    items.sort_by_key(|(n, _, _)| *n);
    for (i, (n, k, _)) in items.iter().enumerate() {
        if *n != i + 1 {
            return err(k.clone(), format!("step numbers must run 1..={} without gaps", items.len()));
        }
    }
    if items.is_empty() {
        return err("$", "no steps");
    }
    Ok(items.into_iter().map(|(_, k, o)| (k, o)).collect())
}

fn only_keys(path: &str, o: &Map<String, Value>, allowed: &[&str]) -> Result<(), ParseError> {
    match o.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => err(format!("{path}.{k}"), "unexpected field"),
        None => Ok(()),
    }
}

fn string<'a>(path: &str, o: &'a Map<String, Value>, key: &str) -> Result<&'a str, ParseError> {
    match o.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => err(format!("{path}.{key}"), "expected a string"),
        None => err(format!("{path}.{key}"), "missing field"),
    }
}

fn class_of(s: &str) -> Option<StepClass> {
    let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
    let norm = norm.trim_end_matches('s');
    StepClass::ALL.into_iter().find(|c| c.name().to_lowercase().trim_end_matches('s') == norm)
}

/// Storey from a `_floorN` suffix; 0 when the component names none.
fn storey_of(component: &str) -> u32 {
    component.rsplit_once("_floor").and_then(|(_, n)| n.parse().ok()).unwrap_or(0)
}

fn parse_steps(m: &Map<String, Value>) -> Result<Vec<GeneralStep>, ParseError> {
    let mut steps = Vec::new();
    for (i, (path, o)) in numbered(m, "step ")?.into_iter().enumerate() {
        only_keys(&path, o, &["class", "component", "description"])?;
        let class_text = string(&path, o, "class")?;
        let Some(class) = class_of(class_text) else {
            return err(format!("{path}.class"), format!("unknown class {class_text:?}"));
        };
        let components: Vec<String> = match o.get("component") {
            Some(Value::String(s)) => s.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect(),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_str().map(String::from))
                .collect::<Option<_>>()
                .map_or_else(|| err(format!("{path}.component"), "expected strings"), Ok)?,
            Some(_) => return err(format!("{path}.component"), "expected a string or a list"),
            None => return err(format!("{path}.component"), "missing field"),
        };
        if components.is_empty() {
            return err(format!("{path}.component"), "no components");
        }
        let description = string(&path, o, "description")?.to_string();
        let storey = storey_of(&components[0]);
        steps.push(GeneralStep { index: i + 1, class, storey, components, description });
    }
    Ok(steps)
}

fn parse_substeps(m: &Map<String, Value>) -> Result<Vec<SubStep>, ParseError> {
    let mut out = Vec::new();
    for (i, (path, o)) in numbered(m, "sub_step_")?.into_iter().enumerate() {
        only_keys(&path, o, &["action name", "action_type", "actions", "coordinates", "description", "goal"])?;
        if let Some(v) = o.get("action name") {
            if !v.is_string() {
                return err(format!("{path}.action name"), "expected a string");
            }
        }
        let kind = match string(&path, o, "action_type")? {
            "Pure-Action" => SubStepKind::PureAction,
            "Vision-Driven" => SubStepKind::VisionDriven,
            other => return err(format!("{path}.action_type"), format!("unknown action type {other:?}")),
        };
        let description = string(&path, o, "description")?.to_string();
        let actions = match (kind, o.get("actions")) {
            (SubStepKind::VisionDriven, Some(_)) => {
                return err(format!("{path}.actions"), "Vision-Driven substeps carry no actions")
            }
            (SubStepKind::VisionDriven, None) => None,
            (SubStepKind::PureAction, None) => return err(format!("{path}.actions"), "missing field"),
            (SubStepKind::PureAction, Some(Value::String(s))) => {
                let script = parse_script(s).or_else(|e| err(format!("{path}.actions"), e.to_string()))?;
                if script.is_empty() {
                    return err(format!("{path}.actions"), "empty action list");
                }
                Some(script)
            }
            (SubStepKind::PureAction, Some(_)) => return err(format!("{path}.actions"), "expected a string"),
        };
        let coordinates = match o.get("coordinates") {
            None => None,
            Some(v) => Some(
                serde_json::from_value::<Vec<[i32; 2]>>(v.clone())
                    .or_else(|e| err(format!("{path}.coordinates"), e.to_string()))?
                    .into_iter()
                    .map(|[x, y]| GuiPoint::new(x, y))
                    .collect(),
            ),
        };
        let goal = match o.get("goal") {
            None => None,
            Some(v) => Some(
                serde_json::from_value::<SubGoal>(v.clone()).or_else(|e| err(format!("{path}.goal"), e.to_string()))?,
            ),
        };
        out.push(SubStep {
            index: i + 1,
            kind,
            // Filled in by the caller from the step being planned.
            class: StepClass::Layer,
            storey: 0,
            description,
            actions,
            coordinates,
            goal,
        });
    }
    Ok(out)
}

/// Parse a planner response: `"step N"` objects for the high-level planner,
/// `"sub_step_N"` objects for the low-level planner.
pub fn parse_plan_response(role: Role, text: &str) -> Result<PlanResponse, ParseError> {
    let m = object(text)?;
    match role {
        Role::HighLevelPlanner => parse_steps(&m).map(PlanResponse::Steps),
        Role::LowLevelPlanner => parse_substeps(&m).map(PlanResponse::SubSteps),
        other => err("$", format!("{other:?} does not produce plans")),
    }
}

/// Parse an action-generator response into a script and the flag asking
/// for another grounding round.
pub fn parse_action_response(text: &str) -> Result<(ActionScript, bool), ParseError> {
    let m = object(text)?;
    only_keys("$", &m, &["action name", "actions", "continue"])?;
    let script = parse_script(string("$", &m, "actions")?).or_else(|e| err("$.actions", e.to_string()))?;
    let more = match m.get("continue") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return err("$.continue", "expected a boolean"),
    };
    Ok((script, more))
}

/// Parse a supervisor response: `approved_value:` then `success`/`fail`,
/// an optional `reasons:` block and an optional `actions:` object.
pub fn parse_supervisor_response(text: &str) -> Result<Verdict, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let skip_blank = |i: &mut usize| {
        while *i < lines.len() && lines[*i].trim().is_empty() {
            *i += 1;
        }
    };
    skip_blank(&mut i);
    if lines.get(i).map(|l| l.trim()) != Some("approved_value:") {
        return err(format!("line {}", i + 1), "expected \"approved_value:\"");
    }
    i += 1;
    skip_blank(&mut i);
    let approved = match lines.get(i).map(|l| l.trim().to_lowercase()).as_deref() {
        Some("success") => Approval::Success,
        Some("fail") => Approval::Fail,
        _ => return err(format!("line {}", i + 1), "expected success or fail"),
    };
    i += 1;
    skip_blank(&mut i);
    let mut reasons = String::new();
    if lines.get(i).map(|l| l.trim()) == Some("reasons:") {
        i += 1;
        let start = i;
        while i < lines.len() && lines[i].trim() != "actions:" {
            i += 1;
        }
        reasons = lines[start..i].join("\n").trim().to_string();
    }
    skip_blank(&mut i);
    let mut corrected = None;
    if lines.get(i).map(|l| l.trim()) == Some("actions:") {
        let body = lines[i + 1..].join("\n");
        let (script, _) =
            parse_action_response(&body).map_err(|e| ParseError { path: format!("actions.{}", e.path), ..e })?;
        corrected = Some(script);
        i = lines.len();
    }
    skip_blank(&mut i);
    if i < lines.len() {
        return err(format!("line {}", i + 1), "unexpected text");
    }
    match approved {
        Approval::Fail if reasons.is_empty() => err("reasons", "a failed verdict must give reasons"),
        Approval::Success if corrected.is_some() => err("actions", "corrected actions only accompany a failure"),
        Approval::Success => Ok(Verdict {
            approved,
            reasons: if reasons.is_empty() { "success".into() } else { reasons },
            corrected_actions: None,
        }),
        Approval::Fail => Ok(Verdict { approved, reasons, corrected_actions: corrected }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::Action;

    #[test]
    fn one_pure_substep() {
        let text = r#"{"sub_step_1": {"action name": "close", "action_type": "Pure-Action", "actions": "['press_enter()']", "description": "close"}}"#;
        let PlanResponse::SubSteps(s) = parse_plan_response(Role::LowLevelPlanner, text).unwrap() else { panic!() };
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].actions.as_ref().unwrap().actions, [Action::PressEnter]);
    }

    #[test]
    fn prose_around_the_object_is_rejected() {
        let body =
            r#"{"sub_step_1": {"action_type": "Pure-Action", "actions": "['press_enter()']", "description": "d"}}"#;
        assert!(parse_plan_response(Role::LowLevelPlanner, &format!("Sure! {body}")).is_err());
        assert!(parse_plan_response(Role::LowLevelPlanner, &format!("{body} Done.")).is_err());
    }

    #[test]
    fn vision_substep_with_actions_is_rejected() {
        let text =
            r#"{"sub_step_1": {"action_type": "Vision-Driven", "actions": "['left_click()']", "description": "d"}}"#;
        let e = parse_plan_response(Role::LowLevelPlanner, text).unwrap_err();
        assert_eq!(e.path, "sub_step_1.actions");
    }

    #[test]
    fn bad_action_string_reports_path() {
        let text = r#"{"sub_step_1": {"action_type": "Pure-Action", "actions": "['fly()']", "description": "d"}}"#;
        assert_eq!(parse_plan_response(Role::LowLevelPlanner, text).unwrap_err().path, "sub_step_1.actions");
    }

    #[test]
    fn steps_parse_with_storeys_and_gaps_fail() {
        let text = r#"{"step 1": {"class": "layer", "component": "layer_floor2", "description": "d"},
                       "step 2": {"class": "external walls", "component": "wall1_floor2, wall2_floor2", "description": "d"}}"#;
        let PlanResponse::Steps(s) = parse_plan_response(Role::HighLevelPlanner, text).unwrap() else { panic!() };
        assert_eq!((s[1].class, s[1].storey, s[1].components.len()), (StepClass::ExternalWalls, 2, 2));
        let gap = r#"{"step 1": {"class": "Roof", "component": "roof", "description": "d"}, "step 3": {"class": "Roof", "component": "roof", "description": "d"}}"#;
        assert!(parse_plan_response(Role::HighLevelPlanner, gap).is_err());
        let missing = r#"{"step 1": {"class": "Roof", "description": "d"}}"#;
        assert_eq!(parse_plan_response(Role::HighLevelPlanner, missing).unwrap_err().path, "step 1.component");
    }

    #[test]
    fn supervisor_verdicts() {
        let v = parse_supervisor_response("approved_value:\nsuccess\n\nreasons:\nsuccess").unwrap();
        assert_eq!(v.approved, Approval::Success);
        let v = parse_supervisor_response("approved_value:\nfail\n\nreasons:\nName changed to 3000\n").unwrap();
        assert_eq!((v.approved, v.reasons.as_str()), (Approval::Fail, "Name changed to 3000"));
        assert!(parse_supervisor_response("approved_value:\nfail\n\nreasons:\n").is_err());
        assert!(parse_supervisor_response("reasons:\nfine").is_err());
        assert!(parse_supervisor_response("approved_value:\nmaybe").is_err());
    }

    #[test]
    fn supervisor_corrected_actions() {
        let text = "approved_value:\nfail\n\nreasons:\nwrong wall\n\nactions:\n{\"action name\": \"redo\", \"actions\": \"['press_enter()']\"}\n";
        let v = parse_supervisor_response(text).unwrap();
        assert_eq!(v.corrected_actions.unwrap().actions, [Action::PressEnter]);
        let mut verdict = Verdict::fail("wrong wall");
        verdict.corrected_actions = Some(ActionScript::new(vec![Action::LeftClick]));
        assert_eq!(parse_supervisor_response(&verdict.to_response()).unwrap(), verdict);
        assert_eq!(parse_supervisor_response(&Verdict::success().to_response()).unwrap(), Verdict::success());
    }

    #[test]
    fn action_response() {
        let (s, more) =
            parse_action_response(r#"{"action name": "x", "actions": "['left_click()']", "continue": true}"#).unwrap();
        assert_eq!((s.len(), more), (1, true));
        assert!(parse_action_response(r#"{"actions": "['left_click()']", "extra": 1}"#).is_err());
    }
}
