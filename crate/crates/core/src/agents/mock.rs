//! A deterministic stand-in for a chat endpoint, driven by a room's oracle.
//!
//! It answers each prompt kind the agents send:
//! - decision prompts follow the oracle in order, except that a code is only
//!   entered once the memory section of the prompt states it
//!   (`"<lock> code is <answer>"`); until then it guesses `0000`;
//! - memory prompts record such a statement once the clue scene's caption
//!   shows up in the logs, alongside walls seen and objects inspected;
//! - feedback prompts compare the two observations;
//! - retry prompts turn toward the wall holding the object named in the
//!   rejected action.
//!
//! An agent that does not keep memory therefore never learns a code.

use std::sync::Mutex;

use regex::Regex;

use super::chat::{ChatError, ChatModel, ChatRequest, ChatResponse, TokenUsage};
use super::memory::{parse_memory, AgentMemory, ObjectNotes, WallMemory};
use crate::engine::{apply_action, faced_code_lock, initial_state, Action};
use crate::room::{Direction, ItemPlacement, RoomSpec};

struct PlanStep {
    action: String,
    /// `(lock id, answer)` for code entries.
    code: Option<(String, String)>,
}

pub struct ScriptedChatModel {
    spec: RoomSpec,
    plan: Vec<PlanStep>,
    cursor: Mutex<usize>,
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = text[start..].find(close)? + start;
    Some(&text[start..end])
}

fn line_after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    let start = text.find(marker)? + marker.len();
    Some(text[start..].lines().next().unwrap_or_default().trim())
}

fn list_items(text: &str) -> Vec<String> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl ScriptedChatModel {
    pub fn from_room(spec: &RoomSpec) -> Self {
        let mut state = initial_state(spec);
        let mut plan = Vec::new();
        for text in &spec.oracle {
            let code = match text.parse::<Action>() {
                Ok(Action::Answer { code }) => faced_code_lock(spec, &state).map(|l| (l.id.clone(), code)),
                _ => None,
            };
            if let Ok(action) = text.parse::<Action>() {
                if let Ok((next, _, _)) = apply_action(spec, &state, &action) {
                    state = next;
                }
            }
            plan.push(PlanStep {
                action: text.clone(),
                code,
            });
        }
        ScriptedChatModel {
            spec: spec.clone(),
            plan,
            cursor: Mutex::new(0),
        }
    }

    fn respond(&self, prompt: &str) -> String {
        if prompt.contains("Analyze the effect of your action") {
            self.feedback(prompt)
        } else if prompt.contains("is not currently available") {
            self.retry(prompt)
        } else if prompt.contains("Construct your memory") || prompt.contains("Update your memory") {
            self.memory(prompt)
        } else if prompt.contains("<Current Observation>") {
            self.react(prompt)
        } else {
            "A plain view.".to_string()
        }
    }

    fn react(&self, prompt: &str) -> String {
        let mut cursor = self.cursor.lock().expect("mock cursor lock");
        let Some(step) = self.plan.get(*cursor) else {
            let first = between(prompt, "You can do one of the following actions: ", "\n")
                .or_else(|| prompt.lines().find(|l| l.starts_with("[turn_to_")))
                .map(list_items)
                .and_then(|v| v.into_iter().next())
                .unwrap_or_else(|| "back".into());
            return format!("[THINK]\nThe plan is done.\n[ACTION]\n{first}");
        };
        match &step.code {
            None => {
                *cursor += 1;
                format!("[THINK]\nNext I will {}.\n[ACTION]\n{}", step.action, step.action)
            }
            Some((lock, answer)) => {
                let memory = between(prompt, "<Memory>", "</Memory>").unwrap_or_default();
                let known = Regex::new(&format!(r"(?i){} code is (\S+?)[.,\x22\]]", regex::escape(lock)))
                    .expect("escaped lock pattern")
                    .captures(memory)
                    .map(|c| c[1].to_string());
                match known {
                    Some(code) if code.eq_ignore_ascii_case(answer) => {
                        *cursor += 1;
                        format!("[THINK]\nMy memory says the {lock} code is {code}.\n[ACTION]\n<ANSWER>{code}</ANSWER>")
                    }
                    _ => format!("[THINK]\nI do not know the {lock} code yet, so I guess.\n[ACTION]\n<ANSWER>0000</ANSWER>"),
                }
            }
        }
    }

    fn feedback(&self, prompt: &str) -> String {
        let before = line_after(prompt, "<Previous Observation> : ").unwrap_or_default();
        let action = line_after(prompt, "<Previous Action> : ").unwrap_or_default();
        let after = line_after(prompt, "<Current Observation> : ").unwrap_or_default();
        if before == after {
            if let Ok(Action::Answer { code }) = action.parse::<Action>() {
                return format!("{code} is not the correct password for this lock.");
            }
            return "Nothing changed.".into();
        }
        format!("{action} changed the scene.")
    }

    fn retry(&self, prompt: &str) -> String {
        let rejected = line_after(prompt, "<Your Previous Action> ").unwrap_or_default().to_lowercase();
        let available = line_after(prompt, "<Available Actions> ").map(list_items).unwrap_or_default();
        let wall_of = |receptacle: &str| self.spec.receptacle(receptacle).map(|r| r.wall);
        let target: Option<Direction> = self
            .spec
            .receptacles
            .iter()
            .filter(|r| rejected.contains(&r.id))
            .map(|r| r.wall)
            .next()
            .or_else(|| {
                self.spec
                    .items
                    .iter()
                    .filter(|i| rejected.contains(&i.id))
                    .find_map(|i| match &i.location {
                        ItemPlacement::InReceptacle(r) => wall_of(r),
                        ItemPlacement::Hidden => None,
                    })
            });
        let choice = target
            .map(|d| format!("turn_to_{d}"))
            .filter(|a| available.contains(a))
            .or_else(|| available.first().cloned())
            .unwrap_or_else(|| "back".into());
        format!("[ACTION] {choice}")
    }

    fn memory(&self, prompt: &str) -> String {
        let mut memory = between(prompt, "<Current Memory>", "</Current Memory>")
            .and_then(|m| parse_memory(m).ok())
            .map(|p| p.memory)
            .unwrap_or_else(AgentMemory::default);
        let logs = between(prompt, "<Last 10 logs(from oldest to latest)>", "</Last 10 logs>").unwrap_or_default();
        for direction in Direction::ALL {
            let prefix = format!("wall:{direction}");
            let seen = self
                .spec
                .scene_captions
                .iter()
                .any(|(key, cap)| key.starts_with(&prefix) && logs.contains(&cap.text));
            if seen {
                memory.spatial.insert(
                    direction.to_string(),
                    WallMemory {
                        objects: self.spec.wall(direction).to_vec(),
                    },
                );
            }
        }
        for line in logs.lines() {
            if let Some(rest) = line.strip_prefix("Action: [inspect ") {
                if let Some(id) = rest.split(']').next() {
                    memory.inspected.entry(id.to_string()).or_insert_with(ObjectNotes::default);
                }
            }
        }
        for lock in &self.spec.locks {
            let Some(answer) = &lock.answer else { continue };
            let clue_seen = lock
                .clue_scenes
                .iter()
                .filter_map(|s| self.spec.scene_captions.get(s))
                .any(|cap| logs.contains(&cap.text));
            let fact = format!("{} code is {}.", lock.id, answer);
            if clue_seen && !memory.additional.contains(&fact) {
                memory.additional.push(fact);
            }
        }
        memory.serialize()
    }
}

impl ChatModel for ScriptedChatModel {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        if request.messages.is_empty() {
            return Err(ChatError::EmptyRequest);
        }
        let prompt = request.prompt();
        let text = self.respond(prompt);
        Ok(ChatResponse {
            usage: Some(TokenUsage {
                prompt_tokens: prompt.split_whitespace().count() as u32,
                completion_tokens: text.split_whitespace().count() as u32,
            }),
            text,
            latency_ms: 0,
        })
    }
}
