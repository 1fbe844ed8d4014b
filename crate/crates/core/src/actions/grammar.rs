//! Recursive-descent parser and canonical serializer for action scripts.
//!
//! The accepted grammar is documented in `docs/script-grammar.md`.

use thiserror::Error;

use super::{Action, ActionScript};
use crate::raster::font;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ScriptError {
    /// Character (not byte) offset into the source text.
    pub offset: usize,
    pub kind: ScriptErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptErrorKind {
    #[error("script is empty")]
    Empty,
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("`{action}` takes {expected} argument(s), got {found}")]
    Arity { action: String, expected: usize, found: usize },
    #[error("unknown parameter `{param}` for `{action}`")]
    UnknownParameter { action: String, param: String },
    #[error("coordinate is not an integer")]
    NonIntegerCoordinate,
    #[error("unterminated quote")]
    UnterminatedQuote,
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("character {0:?} cannot be typed")]
    UnsupportedChar(char),
    #[error("empty key combination")]
    EmptyCombo,
    #[error("trailing input")]
    Trailing,
}

/// Lowercase a combo and strip whitespace around `+`.
pub fn normalize_combo(combo: &str) -> Option<String> {
    let parts: Vec<String> = combo.split('+').map(|p| p.trim().to_lowercase()).collect();
    if parts.iter().any(|p| p.is_empty() || p.chars().any(char::is_whitespace)) {
        return None;
    }
    Some(parts.join("+"))
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    /// Unquoted text up to the closing parenthesis.
    Bare(String),
}

struct Arg {
    name: Option<String>,
    value: Value,
    offset: usize,
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err<T>(&self, kind: ScriptErrorKind) -> Result<T, ScriptError> {
        Err(ScriptError { offset: self.pos, kind })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, what: &'static str) -> Result<(), ScriptError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(ScriptErrorKind::Expected(what))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    fn script(&mut self) -> Result<Vec<Action>, ScriptError> {
        self.ws();
        let mut actions = Vec::new();
        if self.eat('[') {
            if !self.eat(']') {
                loop {
                    actions.push(self.item()?);
                    if self.eat(',') {
                        if self.eat(']') {
                            break;
                        }
                        continue;
                    }
                    self.expect(']', "`,` or `]`")?;
                    break;
                }
            }
        } else if self.peek().is_some() {
            loop {
                actions.push(self.item()?);
                if !self.eat(',') {
                    break;
                }
            }
        }
        self.ws();
        if self.peek().is_some() {
            return self.err(ScriptErrorKind::Trailing);
        }
        if actions.is_empty() {
            return self.err(ScriptErrorKind::Empty);
        }
        Ok(actions)
    }

    /// A call, optionally wrapped in a pair of matching quotes. Quotes inside
    /// the call may reuse the wrapper's quote character.
    fn item(&mut self) -> Result<Action, ScriptError> {
        self.ws();
        let open = self.pos;
        let quote = match self.peek() {
            Some(q @ ('\'' | '"')) => {
                self.pos += 1;
                Some(q)
            }
            _ => None,
        };
        let action = self.call()?;
        if let Some(q) = quote {
            self.ws();
            if self.peek() != Some(q) {
                return Err(ScriptError { offset: open, kind: ScriptErrorKind::UnterminatedQuote });
            }
            self.pos += 1;
        }
        Ok(action)
    }

    fn call(&mut self) -> Result<Action, ScriptError> {
        self.ws();
        let start = self.pos;
        let Some(name) = self.ident() else { return self.err(ScriptErrorKind::Expected("action name")) };
        let arity = match name.as_str() {
            "move_mouse_to" => 2,
            "type_name" | "shortcut" => 1,
            "left_click" | "press_escape" | "press_enter" | "select_all" => 0,
            _ => return Err(ScriptError { offset: start, kind: ScriptErrorKind::UnknownAction(name) }),
        };
        self.expect('(', "`(`")?;
        let args = self.args(arity == 1)?;
        if args.len() != arity {
            return Err(ScriptError {
                offset: start,
                kind: ScriptErrorKind::Arity { action: name, expected: arity, found: args.len() },
            });
        }
        let check_name = |a: &Arg, allowed: &str| match &a.name {
            Some(n) if n != allowed => Err(ScriptError {
                offset: a.offset,
                kind: ScriptErrorKind::UnknownParameter { action: name.clone(), param: n.clone() },
            }),
            _ => Ok(()),
        };
        Ok(match name.as_str() {
            "move_mouse_to" => {
                let mut xy = [0i32; 2];
                let mut by_name = [None, None];
                for (i, a) in args.iter().enumerate() {
                    let slot = match a.name.as_deref() {
                        None => i,
                        Some("x") => 0,
                        Some("y") => 1,
                        Some(other) => {
                            return Err(ScriptError {
                                offset: a.offset,
                                kind: ScriptErrorKind::UnknownParameter { action: name.clone(), param: other.into() },
                            })
                        }
                    };
                    if by_name[slot].replace(()).is_some() {
                        return Err(ScriptError {
                            offset: a.offset,
                            kind: ScriptErrorKind::Expected("distinct x and y"),
                        });
                    }
                    let text = match &a.value {
                        Value::Bare(t) | Value::Str(t) => t.trim(),
                    };
                    xy[slot] = text
                        .parse()
                        .map_err(|_| ScriptError { offset: a.offset, kind: ScriptErrorKind::NonIntegerCoordinate })?;
                }
                Action::MoveMouseTo { x: xy[0], y: xy[1] }
            }
            "type_name" => {
                check_name(&args[0], "name")?;
                let text = match &args[0].value {
                    Value::Str(t) => t.clone(),
                    Value::Bare(t) => t.trim().to_string(),
                };
                if let Some(c) = text.chars().find(|c| !font().supports(&c.to_string())) {
                    return Err(ScriptError { offset: args[0].offset, kind: ScriptErrorKind::UnsupportedChar(c) });
                }
                Action::TypeName(text)
            }
            "shortcut" => {
                check_name(&args[0], "combo")?;
                let (Value::Str(t) | Value::Bare(t)) = &args[0].value;
                let combo = normalize_combo(t)
                    .ok_or(ScriptError { offset: args[0].offset, kind: ScriptErrorKind::EmptyCombo })?;
                Action::Shortcut(combo)
            }
            "left_click" => Action::LeftClick,
            "press_escape" => Action::PressEscape,
            "press_enter" => Action::PressEnter,
            _ => Action::SelectAll,
        })
    }

    /// Arguments up to and including `)`. With `single`, an unquoted value
    /// runs to the closing parenthesis (commas and spaces included).
    fn args(&mut self, single: bool) -> Result<Vec<Arg>, ScriptError> {
        let mut args = Vec::new();
        if self.eat(')') {
            return Ok(args);
        }
        loop {
            self.ws();
            let offset = self.pos;
            let save = self.pos;
            let name = match self.ident() {
                Some(n) if self.eat('=') => Some(n),
                _ => {
                    self.pos = save;
                    None
                }
            };
            self.ws();
            let value = match self.peek() {
                Some(q @ ('\'' | '"')) => Value::Str(self.string(q)?),
                _ => Value::Bare(self.bare(single)?),
            };
            args.push(Arg { name, value, offset });
            if self.eat(',') {
                continue;
            }
            self.expect(')', "`,` or `)`")?;
            return Ok(args);
        }
    }

    fn string(&mut self, q: char) -> Result<String, ScriptError> {
        let open = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(ScriptError { offset: open, kind: ScriptErrorKind::UnterminatedQuote }),
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c) => out.push(c),
                        None => return Err(ScriptError { offset: open, kind: ScriptErrorKind::UnterminatedQuote }),
                    }
                }
                Some(c) if c == q => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(c) => out.push(c),
            }
            self.pos += 1;
        }
    }

    fn bare(&mut self, single: bool) -> Result<String, ScriptError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == ')' || (!single && c == ',') || c == '\'' || c == '"' {
                break;
            }
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if text.trim().is_empty() {
            self.pos = start;
            return self.err(ScriptErrorKind::Expected("argument value"));
        }
        Ok(text)
    }
}

/// Parse a script in either the list form `['a()', "b(x=1, y=2)"]` or as a
/// bare comma-separated sequence of calls.
pub fn parse_script(text: &str) -> Result<ActionScript, ScriptError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0 };
    let actions = p.script()?;
    Ok(ActionScript { actions, source_text: Some(text.to_string()) })
}

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Canonical text of a single action.
pub fn serialize_action(a: &Action) -> String {
    match a {
        Action::MoveMouseTo { x, y } => format!("move_mouse_to(x={x}, y={y})"),
        Action::LeftClick => "left_click()".into(),
        Action::TypeName(t) => format!("type_name({})", quoted(t)),
        Action::PressEscape => "press_escape()".into(),
        Action::PressEnter => "press_enter()".into(),
        Action::Shortcut(c) => format!("shortcut(combo={})", quoted(c)),
        Action::SelectAll => "select_all()".into(),
    }
}

/// Canonical list form: single-quoted items, inner strings double-quoted.
pub fn serialize_script(script: &ActionScript) -> String {
    let items: Vec<String> = script.actions.iter().map(|a| format!("'{}'", serialize_action(a))).collect();
    format!("[{}]", items.join(", "))
}
