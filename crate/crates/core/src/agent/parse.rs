//! Parsers for planner and actor text output.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::types::{Plan, Subgoal};
use crate::env::{Action, ActionType, ElementId, ScrollDirection};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanParseError {
    #[error("no <plan> block")]
    MissingPlan,
    #[error("<plan> block is empty")]
    EmptyPlan,
    /// The plan parsed but no subgoal was given; carries the plan so the
    /// caller can fall back.
    #[error("no <subgoal> block")]
    MissingSubgoal(Plan),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionParseError {
    #[error("no action call found")]
    NoAction,
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("{action} expects {expected}, got {got:?}")]
    Arity {
        action: &'static str,
        expected: &'static str,
        got: String,
    },
    #[error("bad argument: {0}")]
    BadArgument(String),
}

fn tag_re(tag: &str) -> Regex {
    Regex::new(&format!(r"(?is)<{tag}>(.*?)</{tag}>")).expect("static regex")
}

fn plan_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| tag_re("plan"))
}

fn subgoal_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| tag_re("subgoal"))
}

fn plan_from_body(body: &str) -> Result<Plan, PlanParseError> {
    let raw = body.trim().to_string();
    let steps: Vec<String> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if steps.is_empty() {
        return Err(PlanParseError::EmptyPlan);
    }
    Ok(Plan { steps, raw })
}

/// Extracts the first `<plan>` and `<subgoal>` blocks, wherever they sit.
pub fn parse_plan_output(text: &str) -> Result<(Plan, Subgoal), PlanParseError> {
    let body = plan_re()
        .captures(text)
        .ok_or(PlanParseError::MissingPlan)?;
    let plan = plan_from_body(&body[1])?;
    match subgoal_re().captures(text) {
        Some(c) if !c[1].trim().is_empty() => Ok((plan, Subgoal::new(c[1].trim()))),
        _ => Err(PlanParseError::MissingSubgoal(plan)),
    }
}

fn numbered_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d+[.)]\s+\S").expect("static regex"))
}

/// Parses a fresh plan. Tagged output is handled as in
/// [`parse_plan_output`]; an untagged numbered list is also accepted, with
/// its first step as the subgoal.
pub fn parse_generated_plan(text: &str) -> Result<(Plan, Subgoal), PlanParseError> {
    if plan_re().is_match(text) {
        return parse_plan_output(text);
    }
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let numbered: Vec<String> = lines
        .iter()
        .filter(|l| numbered_re().is_match(l))
        .map(|l| l.to_string())
        .collect();
    if numbered.is_empty() {
        return Err(PlanParseError::MissingPlan);
    }
    let subgoal = Subgoal::new(numbered[0].clone());
    Ok((Plan::from_steps(numbered), subgoal))
}

pub fn format_plan_output(plan: &Plan, subgoal: &Subgoal) -> String {
    format!("<plan>{}</plan>\n<subgoal>{}</subgoal>", plan.raw, subgoal.text)
}

fn call_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(").expect("static regex"))
}

fn action_type_named(name: &str) -> Option<ActionType> {
    ActionType::ALL
        .into_iter()
        .find(|t| t.name().eq_ignore_ascii_case(name))
}

/// Finds the argument text of the call opening at `open` (index just past
/// `(`), honoring quoted strings and nested brackets.
fn call_body(text: &str, open: usize) -> Result<&str, ActionParseError> {
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[open..].char_indices() {
        if in_str {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '(' | '{' | '[' => depth += 1,
            ')' if depth == 0 => return Ok(&text[open..open + i]),
            ')' | '}' | ']' => depth -= 1,
            _ => {}
        }
    }
    Err(ActionParseError::BadArgument("unterminated action call".into()))
}

/// Splits on top-level commas.
fn split_args(body: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut in_str, mut escaped, mut start) = (0i32, false, false, 0);
    for (i, c) in body.char_indices() {
        if in_str {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '(' | '{' | '[' => depth += 1,
            ')' | '}' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(body[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = body[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

fn unquote(arg: &str) -> Option<String> {
    let arg = arg.trim();
    if arg.len() >= 2 && arg.starts_with('"') && arg.ends_with('"') {
        return serde_json::from_str(arg).ok();
    }
    if arg.len() >= 2 && arg.starts_with('\'') && arg.ends_with('\'') {
        return Some(arg[1..arg.len() - 1].to_string());
    }
    None
}

/// Free-text argument: one quoted string, or unquoted text (commas allowed).
fn text_arg(rest: &[&str], raw: &str, action: &'static str) -> Result<String, ActionParseError> {
    match rest {
        [] => Err(ActionParseError::Arity {
            action,
            expected: "a text argument",
            got: raw.to_string(),
        }),
        [one] => Ok(unquote(one).unwrap_or_else(|| one.to_string())),
        _ if !raw.contains('"') => Ok(raw.trim().to_string()),
        _ => Err(ActionParseError::Arity {
            action,
            expected: "a single text argument",
            got: raw.to_string(),
        }),
    }
}

fn element_arg(arg: &str) -> Result<ElementId, ActionParseError> {
    let arg = arg.trim().trim_start_matches('[').trim_end_matches(']');
    arg.parse::<u32>()
        .map(ElementId)
        .map_err(|_| ActionParseError::BadArgument(format!("element id {arg:?}")))
}

fn after_first_comma(body: &str) -> &str {
    let args = split_args(body);
    match args.get(1) {
        // `split_args` yields subslices of `body`.
        Some(second) => body[second.as_ptr() as usize - body.as_ptr() as usize..].trim(),
        None => "",
    }
}

pub fn parse_action_output(text: &str) -> Result<Action, ActionParseError> {
    let mut first_unknown = None;
    let mut found = None;
    for cap in call_re().captures_iter(text) {
        let name = cap.get(1).expect("group");
        match action_type_named(name.as_str()) {
            Some(ty) => {
                found = Some((ty, cap.get(0).expect("match").end()));
                break;
            }
            None => {
                first_unknown.get_or_insert_with(|| name.as_str().to_string());
            }
        }
    }
    let Some((ty, open)) = found else {
        return Err(match first_unknown {
            Some(name) => ActionParseError::UnknownAction(name),
            None => ActionParseError::NoAction,
        });
    };
    let body = call_body(text, open)?;
    let args = split_args(body);
    let arity = |expected: &'static str| ActionParseError::Arity {
        action: ty.name(),
        expected,
        got: body.to_string(),
    };
    Ok(match ty {
        ActionType::Click => match args.as_slice() {
            [id] => Action::Click {
                element_id: element_arg(id)?,
            },
            _ => return Err(arity("(element_id)")),
        },
        ActionType::Scroll => match args.as_slice() {
            [dir, amount] => {
                let direction = match unquote(dir).unwrap_or_else(|| dir.to_string()).to_lowercase().as_str() {
                    "up" => ScrollDirection::Up,
                    "down" => ScrollDirection::Down,
                    other => return Err(ActionParseError::BadArgument(format!("direction {other:?}"))),
                };
                let amount = amount
                    .parse::<u32>()
                    .map_err(|_| ActionParseError::BadArgument(format!("amount {amount:?}")))?;
                Action::Scroll { direction, amount }
            }
            _ => return Err(arity("(direction, amount)")),
        },
        ActionType::Type | ActionType::Select => {
            if args.len() < 2 {
                return Err(arity("(element_id, text)"));
            }
            let element_id = element_arg(args[0])?;
            let text = text_arg(&args[1..], after_first_comma(body), ty.name())?;
            if ty == ActionType::Type {
                Action::Type { element_id, text }
            } else {
                Action::Select {
                    element_id,
                    option: text,
                }
            }
        }
        ActionType::Stop => {
            if body.trim().is_empty() {
                return Err(arity("(answer)"));
            }
            Action::Stop {
                answer: text_arg(&args, body, "Stop")?,
            }
        }
        ActionType::ToolInvoke => match args.as_slice() {
            [name, params] => {
                let tool_name = unquote(name).unwrap_or_else(|| name.to_string());
                if tool_name.is_empty() {
                    return Err(ActionParseError::BadArgument("empty tool name".into()));
                }
                let value: serde_json::Value = serde_json::from_str(params)
                    .map_err(|e| ActionParseError::BadArgument(format!("tool params: {e}")))?;
                let obj = value
                    .as_object()
                    .ok_or_else(|| ActionParseError::BadArgument("tool params must be an object".into()))?;
                let tool_params: BTreeMap<String, String> = obj
                    .iter()
                    .map(|(k, v)| {
                        let v = match v {
                            serde_json::Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        (k.clone(), v)
                    })
                    .collect();
                Action::ToolInvoke {
                    tool_name,
                    tool_params,
                }
            }
            _ => return Err(arity("(tool_name, {params})")),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_and_subgoal() {
        let (plan, sub) = parse_plan_output("<plan>1. a\n2. b</plan><subgoal>a</subgoal>").unwrap();
        assert_eq!(plan.steps, ["1. a", "2. b"]);
        assert_eq!(sub, Subgoal::new("a"));
        assert!(!sub.is_stop);
    }

    #[test]
    fn empty_plan_is_an_error() {
        assert_eq!(
            parse_plan_output("<plan></plan><subgoal>x</subgoal>"),
            Err(PlanParseError::EmptyPlan)
        );
        assert_eq!(parse_plan_output("nothing here"), Err(PlanParseError::MissingPlan));
    }

    #[test]
    fn missing_subgoal_keeps_plan() {
        match parse_plan_output("<plan>1. search</plan>") {
            Err(PlanParseError::MissingSubgoal(p)) => assert_eq!(p.steps, ["1. search"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stop_detection_is_exact() {
        assert!(Subgoal::new("  stop \n").is_stop);
        assert!(!Subgoal::new("stop here").is_stop);
        assert!(!Subgoal::new("STOP.").is_stop);
    }

    #[test]
    fn untagged_numbered_list_for_fresh_plans() {
        let (plan, sub) = parse_generated_plan("Here you go:\n1. open cart\n2. pay\n").unwrap();
        assert_eq!(plan.steps, ["1. open cart", "2. pay"]);
        assert_eq!(sub.text, "1. open cart");
    }

    #[test]
    fn action_examples() {
        assert_eq!(
            parse_action_output("Click(12)").unwrap(),
            Action::Click { element_id: ElementId(12) }
        );
        assert_eq!(
            parse_action_output("Scroll(down, 2)").unwrap(),
            Action::Scroll { direction: ScrollDirection::Down, amount: 2 }
        );
        assert_eq!(
            parse_action_output("Select(4, \"Large\")").unwrap(),
            Action::Select { element_id: ElementId(4), option: "Large".into() }
        );
        assert_eq!(
            parse_action_output("Stop(\"done\")").unwrap(),
            Action::Stop { answer: "done".into() }
        );
        assert_eq!(
            parse_action_output("Fly(3)"),
            Err(ActionParseError::UnknownAction("Fly".into()))
        );
    }

    #[test]
    fn action_names_are_case_insensitive_and_located_in_chatter() {
        assert_eq!(
            parse_action_output("I will now (carefully) click(3) to proceed").unwrap(),
            Action::Click { element_id: ElementId(3) }
        );
        assert_eq!(
            parse_action_output("TYPE(1, usb hub, black)").unwrap(),
            Action::Type { element_id: ElementId(1), text: "usb hub, black".into() }
        );
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(parse_action_output("Click(1, 2)"), Err(ActionParseError::Arity { .. })));
        assert!(matches!(parse_action_output("Scroll(down)"), Err(ActionParseError::Arity { .. })));
        assert!(matches!(parse_action_output("Stop()"), Err(ActionParseError::Arity { .. })));
        assert!(matches!(parse_action_output("Type(3)"), Err(ActionParseError::Arity { .. })));
        assert!(matches!(
            parse_action_output("Type(3, \"a\", \"b\")"),
            Err(ActionParseError::Arity { .. })
        ));
        assert_eq!(parse_action_output("nothing"), Err(ActionParseError::NoAction));
    }

    #[test]
    fn tool_invoke_params() {
        let a = parse_action_output(r#"ToolInvoke(calculator, {"a": 2, "b": "3", "op": "*"})"#).unwrap();
        match a {
            Action::ToolInvoke { tool_name, tool_params } => {
                assert_eq!(tool_name, "calculator");
                assert_eq!(tool_params["a"], "2");
                assert_eq!(tool_params["op"], "*");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quoted_text_with_parens_and_commas() {
        let a = Action::Stop { answer: "(a, b) \"q\" )".into() };
        assert_eq!(parse_action_output(&a.to_string()).unwrap(), a);
    }
}
