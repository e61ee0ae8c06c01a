//! `escape scenes`: list a room's reachable scenes for caption authoring.

use std::io::{self, Write};

use escape_core::validate::explore;
use escape_core::RoomSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneLine {
    pub key: String,
    pub caption: Option<String>,
}

pub fn scene_lines(spec: &RoomSpec) -> Vec<SceneLine> {
    explore(spec)
        .scenes
        .into_iter()
        .map(|key| SceneLine {
            caption: spec.scene_captions.get(&key).map(|c| c.text.clone()),
            key,
        })
        .collect()
}

/// Tab-separated `key`, caption (or `<missing>`). Returns the missing count.
pub fn render(lines: &[SceneLine], missing_only: bool, out: &mut impl Write) -> io::Result<usize> {
    let mut missing = 0;
    for line in lines {
        match &line.caption {
            Some(text) if !missing_only => writeln!(out, "{}\t{}", line.key, text)?,
            Some(_) => {}
            None => {
                missing += 1;
                writeln!(out, "{}\t<missing>", line.key)?;
            }
        }
    }
    Ok(missing)
}
