#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use escape_core::room::SceneCaption;
use escape_core::validate::explore;
use escape_core::{load_room, RoomSpec};

pub const SAMPLE_ROOMS: [&str; 3] = ["room01", "room02", "room03"];

pub fn rooms_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../rooms")
}

pub fn sample(name: &str) -> Arc<RoomSpec> {
    let path = rooms_dir().join(format!("{name}.json"));
    Arc::new(load_room(path).expect("sample room loads"))
}

/// Parses a hand-written room and captions every reachable scene with its
/// own key, so tests can build rooms without writing prose.
pub fn captioned(json: &str) -> RoomSpec {
    let mut spec = RoomSpec::from_json(json).expect("test room parses");
    for scene in explore(&spec).scenes {
        spec.scene_captions
            .entry(scene.clone())
            .or_insert(SceneCaption { text: format!("Scene {scene}."), image: None });
    }
    spec
}

/// Lever on the north wall opens a gate on the south wall.
pub const LEVER_ROOM: &str = r#"{
  "format_version": 1,
  "room_id": "lever",
  "walls": {"north": ["lever"], "east": [], "south": ["gate"], "west": []},
  "receptacles": [
    {"id": "lever", "wall": "north", "states": ["up", "down"], "initial_state": "up",
     "interactions": [{"verb": "pull lever", "when": [{"state_is": {"receptacle": "gate", "state": "shut"}}],
                       "effects": [{"set_state": {"receptacle": "gate", "state": "raised"}}]}]},
    {"id": "gate", "wall": "south", "states": ["shut", "raised"], "initial_state": "shut",
     "interactions": [{"verb": "walk through gate", "when": [{"state_is": {"receptacle": "gate", "state": "raised"}}],
                       "effects": ["escape"]}]}
  ],
  "items": [],
  "checkpoints": [{"id": "gate raised", "condition": {"state_is": {"receptacle": "gate", "state": "raised"}}, "hint": "Something on the north wall moves things."},
                  {"id": "out", "condition": "escaped", "hint": "Go through the gate."}],
  "oracle": ["inspect lever", "pull lever", "turn_to_south", "inspect gate", "walk through gate"]
}"#;

/// A room whose only checkpoint other than escaping sits behind a code the
/// agent must type, with a long corridor of turns available.
pub const CODE_ROOM: &str = r#"{
  "format_version": 1,
  "room_id": "code",
  "walls": {"north": ["panel"], "east": ["plaque"], "south": [], "west": ["door"]},
  "receptacles": [
    {"id": "panel", "wall": "north", "states": ["shut", "open"], "initial_state": "shut", "lock": "panel lock",
     "contains": {"open": ["key"]},
     "interactions": [{"verb": "open panel", "when": [{"lock_solved": "panel lock"}, {"state_is": {"receptacle": "panel", "state": "shut"}}],
                       "effects": [{"set_state": {"receptacle": "panel", "state": "open"}}]}]},
    {"id": "plaque", "wall": "east", "states": ["mounted"], "initial_state": "mounted"},
    {"id": "door", "wall": "west", "states": ["locked", "open"], "initial_state": "locked", "lock": "door lock",
     "interactions": [{"verb": "unlock door with key", "requires_items": ["key"],
                       "effects": [{"solve_lock": "door lock"}, {"set_state": {"receptacle": "door", "state": "open"}}, "escape"]}]}
  ],
  "items": [{"id": "key", "location": {"in_receptacle": "panel"}, "caption": "A steel key."}],
  "locks": [{"id": "panel lock", "kind": "numeric_code", "answer": "4242", "attached_to": "panel",
             "clue_scenes": ["receptacle:plaque|plaque=mounted"]},
            {"id": "door lock", "kind": "key_item", "key_item": "key", "attached_to": "door"}],
  "checkpoints": [{"id": "panel open", "condition": {"lock_solved": "panel lock"}, "hint": "The plaque holds the code."},
                  {"id": "got key", "condition": {"item_acquired": "key"}, "hint": "Take the key."},
                  {"id": "out", "condition": "escaped", "hint": "Use the key on the door."}],
  "oracle": ["turn_to_east", "inspect plaque", "turn_to_north", "inspect panel", "<ANSWER>4242</ANSWER>",
             "open panel", "pick up key", "turn_to_west", "inspect door", "unlock door with key"]
}"#;

/// Three switches on the north wall, each with its own checkpoint, and a door
/// that opens once all three are on.
pub const SWITCH_ROOM: &str = r#"{
  "format_version": 1,
  "room_id": "switches",
  "walls": {"north": ["panel"], "east": [], "south": [], "west": ["door"]},
  "receptacles": [
    {"id": "panel", "wall": "north", "states": ["off", "one", "two", "three"], "initial_state": "off",
     "interactions": [
       {"verb": "flip first switch", "when": [{"state_is": {"receptacle": "panel", "state": "off"}}],
        "effects": [{"set_state": {"receptacle": "panel", "state": "one"}}]},
       {"verb": "flip second switch", "when": [{"state_is": {"receptacle": "panel", "state": "one"}}],
        "effects": [{"set_state": {"receptacle": "panel", "state": "two"}}]},
       {"verb": "flip third switch", "when": [{"state_is": {"receptacle": "panel", "state": "two"}}],
        "effects": [{"set_state": {"receptacle": "panel", "state": "three"}}]}]},
    {"id": "door", "wall": "west", "states": ["shut"], "initial_state": "shut",
     "interactions": [{"verb": "open door", "when": [{"state_is": {"receptacle": "panel", "state": "three"}}],
                       "effects": ["escape"]}]}
  ],
  "items": [],
  "checkpoints": [
    {"id": "first", "condition": {"state_is": {"receptacle": "panel", "state": "one"}}, "hint": "Flip the first switch."},
    {"id": "second", "condition": {"state_is": {"receptacle": "panel", "state": "two"}}, "hint": "Flip the second switch."},
    {"id": "third", "condition": {"state_is": {"receptacle": "panel", "state": "three"}}, "hint": "Flip the third switch."},
    {"id": "out", "condition": "escaped", "hint": "Open the door."}],
  "oracle": ["inspect panel", "flip first switch", "flip second switch", "flip third switch", "turn_to_west", "inspect door", "open door"]
}"#;
