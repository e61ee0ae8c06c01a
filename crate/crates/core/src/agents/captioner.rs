//! Caption prompts for image-backed rooms.
//!
//! Caption-mode runs never call these: the room's authored captions are the
//! observations. They exist so a captioning model can be scored against the
//! same scenes with `metrics::caption_accuracy`.

use super::chat::ChatRequest;
use super::prompts;
use crate::scene::ViewKind;

fn quoted(names: &[String]) -> String {
    names
        .iter()
        .map(|n| format!("\"{n}\""))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `focus` is the item or receptacle in a close-up view (ignored for walls);
/// `names` are the objects visible in it.
pub fn caption_prompt(kind: ViewKind, focus: &str, names: &[String]) -> String {
    match kind {
        ViewKind::Item => prompts::CAPTION_ITEM.fill(&[("item_name", focus)]),
        ViewKind::Receptacle => prompts::CAPTION_RECEPTACLE.fill(&[
            ("object_type", focus),
            ("items_str", &quoted(names)),
        ]),
        ViewKind::Wall => prompts::CAPTION_WALL.fill(&[("objects", &quoted(names))]),
    }
}

pub fn caption_request(model: &str, kind: ViewKind, focus: &str, names: &[String]) -> ChatRequest {
    ChatRequest::single(model, caption_prompt(kind, focus, names), Some(0.0))
}
