//! Prompt templates.
//!
//! Templates live in `templates/<name>.v<version>.txt` and are compiled in, so
//! a run's prompts are fixed by the crate version. Placeholders are `{name}`
//! (lowercase and underscores) and are filled in a single pass: substituted
//! text is never rescanned, and braces that do not form a placeholder (the
//! JSON format examples) are left alone.

use std::sync::LazyLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub version: u32,
    pub text: &'static str,
}

macro_rules! template {
    ($ident:ident, $name:literal) => {
        pub const $ident: Template = Template {
            name: $name,
            version: 1,
            text: include_str!(concat!("../../templates/", $name, ".v1.txt")),
        };
    };
}

template!(INITIAL, "initial");
template!(REACT_INITIAL, "react_initial");
template!(REACT, "react");
template!(PUZZLE, "puzzle");
template!(RETRY, "retry");
template!(MEMORY_CONSTRUCT, "memory_construct");
template!(MEMORY_UPDATE, "memory_update");
template!(MEMORY_LOG_ENTRY, "memory_log_entry");
template!(FEEDBACK, "feedback");
template!(CAPTION_ITEM, "caption_item");
template!(CAPTION_RECEPTACLE, "caption_receptacle");
template!(CAPTION_WALL, "caption_wall");
template!(BASE, "base");

pub const ALL: [Template; 13] = [
    INITIAL,
    REACT_INITIAL,
    REACT,
    PUZZLE,
    RETRY,
    MEMORY_CONSTRUCT,
    MEMORY_UPDATE,
    MEMORY_LOG_ENTRY,
    FEEDBACK,
    CAPTION_ITEM,
    CAPTION_RECEPTACLE,
    CAPTION_WALL,
    BASE,
];

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").expect("valid placeholder regex"));

impl Template {
    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        for cap in PLACEHOLDER.captures_iter(self.text) {
            let name = cap.get(1).expect("group 1 always matches").as_str();
            if !names.contains(&name) {
                names.push(name);
            }
        }
        names
    }

    /// Fills placeholders from `vars`. Unknown placeholders are kept verbatim.
    /// The trailing newline of the template file is dropped.
    pub fn fill(&self, vars: &[(&str, &str)]) -> String {
        let body = self.text.strip_suffix('\n').unwrap_or(self.text);
        PLACEHOLDER
            .replace_all(body, |caps: &regex::Captures<'_>| {
                let name = &caps[1];
                vars.iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| v.to_string())
                    .unwrap_or_else(|| caps[0].to_string())
            })
            .into_owned()
    }

    pub fn id(&self) -> String {
        format!("{}.v{}", self.name, self.version)
    }
}

pub fn initial_prompt() -> String {
    INITIAL.fill(&[])
}

/// `[a, b, c]`, the form used for every action list in prompts.
pub fn action_list(actions: &[String]) -> String {
    format!("[{}]", actions.join(", "))
}

pub fn hint_text(hint: Option<&str>) -> String {
    hint.map(|h| format!("Hint: {h}")).unwrap_or_default()
}

pub fn puzzle_text(puzzle_mode: bool) -> String {
    if puzzle_mode {
        PUZZLE.fill(&[])
    } else {
        String::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_are_listed_once() {
        assert_eq!(
            RETRY.placeholders(),
            ["initial_prompt", "memory", "before_action", "available_actions", "hint_guideline_text"]
        );
        assert!(PUZZLE.placeholders().is_empty());
    }

    #[test]
    fn fill_is_single_pass() {
        let out = CAPTION_ITEM.fill(&[("item_name", "{item_name}")]);
        assert!(out.starts_with("This image is a close-up view of an item '{item_name}'."));
    }

    #[test]
    fn json_examples_survive() {
        let out = MEMORY_CONSTRUCT.fill(&[("initial_prompt", "X"), ("last_10_history", "L")]);
        assert!(out.contains(r#"[SPATIAL MEMORY] {"direction 1" : {"#));
        assert!(!out.contains("{last_10_history}"));
    }

    #[test]
    fn every_template_ends_with_newline_on_disk() {
        for t in ALL {
            assert!(t.text.ends_with('\n'), "{}", t.id());
        }
    }
}
