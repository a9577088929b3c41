//! Instruction-template registry: 25 task families covering generation,
//! captioning, counting and completion, each with phrasing variants. A
//! template is a pair of input/output patterns with angle-bracket slots
//! (`<Caption>`, `<Motion>`, `<Frame>`, `<Second>`, `<Human>` and the
//! motion-part slots used by completion tasks).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LmError;

pub const SLOT_NAMES: [&str; 10] = [
    "Caption",
    "Motion",
    "Frame",
    "Second",
    "Human",
    "Motion_part1",
    "Motion_part2",
    "Motion_react1",
    "Motion_react2",
    "Motion_Masked",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstructionTemplate {
    pub id: String,
    pub task: String,
    pub input: String,
    pub output: String,
}

impl InstructionTemplate {
    /// Slots referenced by either pattern.
    pub fn required_slots(&self) -> Vec<&'static str> {
        SLOT_NAMES
            .iter()
            .copied()
            .filter(|s| {
                let ph = format!("<{s}>");
                self.input.contains(&ph) || self.output.contains(&ph)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateRegistry {
    pub templates: Vec<InstructionTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub input: String,
    pub output: String,
}

fn substitute(pattern: &str, slots: &BTreeMap<String, String>) -> String {
    let mut out = pattern.to_string();
    for (k, v) in slots {
        out = out.replace(&format!("<{k}>"), v);
    }
    out
}

/// Render a template, substituting every placeholder it references.
pub fn render_instruction(
    registry: &TemplateRegistry,
    template_id: &str,
    slots: &BTreeMap<String, String>,
) -> Result<Rendered, LmError> {
    let template = registry
        .templates
        .iter()
        .find(|t| t.id == template_id)
        .ok_or_else(|| LmError::UnknownTemplate(template_id.to_string()))?;
    for slot in template.required_slots() {
        if !slots.contains_key(slot) {
            return Err(LmError::MissingSlot {
                template: template_id.to_string(),
                slot: slot.to_string(),
            });
        }
    }
    let rendered = Rendered {
        input: substitute(&template.input, slots),
        output: substitute(&template.output, slots),
    };
    for pattern in [&rendered.input, &rendered.output] {
        for slot in SLOT_NAMES {
            debug_assert!(
                !pattern.contains(&format!("<{slot}>")),
                "residual placeholder <{slot}> in {template_id}"
            );
        }
    }
    Ok(rendered)
}

impl TemplateRegistry {
    pub fn task_tags(&self) -> Vec<&str> {
        let mut tags: Vec<&str> = self.templates.iter().map(|t| t.task.as_str()).collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    pub fn templates_for(&self, task: &str) -> Vec<&InstructionTemplate> {
        self.templates.iter().filter(|t| t.task == task).collect()
    }

    pub fn save_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("serializable"))
    }

    pub fn load_json(path: &Path) -> Result<TemplateRegistry, LmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LmError::BadConfig(format!("template registry: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| LmError::BadConfig(format!("template registry: {e}")))
    }
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let mut templates = Vec::new();
        let mut add = |task: &str, pairs: &[(&str, &str)]| {
            for (i, (input, output)) in pairs.iter().enumerate() {
                templates.push(InstructionTemplate {
                    id: format!("{task}/{i}"),
                    task: task.to_string(),
                    input: input.to_string(),
                    output: output.to_string(),
                });
            }
        };

        add("text_to_motion", &[
            ("Show me a motion that captures the essence of <Caption>.", "<Motion>"),
            ("Can you generate a motion that represents the <Caption>?", "<Motion>"),
        ]);
        add("text_to_motion_frame", &[
            (
                "I need a motion that lasts approximately <Frame> frames for the caption: <Caption>.",
                "<Motion>",
            ),
            (
                "Can you create a motion sequence that lasts for <Frame> frames and represents <Caption> in motion?",
                "<Motion>",
            ),
        ]);
        add("text_to_motion_second", &[
            (
                "I need a motion that lasts <Second> seconds and conveys the message of <Caption>.",
                "<Motion>",
            ),
            (
                "Can you create a motion that lasts <Second> seconds and demonstrates the concept of <Caption>?",
                "<Motion>",
            ),
        ]);
        add("text_to_motion_human", &[
            (
                "Please create a motion involving <Human> humans and illustrating the idea of <Caption>.",
                "<Motion>",
            ),
            (
                "Can you demonstrate <Caption> with a motion that includes <Human> humans?",
                "<Motion>",
            ),
        ]);
        add("frame_to_motion", &[
            ("Show me a motion that lasts for no more than <Frame> frames.", "<Motion>"),
            ("Can you make a motion that is shorter than <Frame> frames in length?", "<Motion>"),
        ]);
        add("second_to_motion", &[
            ("Give me a motion that has a length of <Second> seconds or less.", "<Motion>"),
            (
                "Can you make a motion that is no longer than <Second> seconds in duration?",
                "<Motion>",
            ),
        ]);
        add("human_to_motion", &[
            (
                "Create a motion that showcases <Human> humans performing unique activities.",
                "<Motion>",
            ),
            ("Can you design a motion for <Human> humans that feels lifelike?", "<Motion>"),
        ]);
        add("random_motion", &[
            ("Create movements that are not anticipated.", "<Motion>"),
            ("Produce movements that are natural and unforced.", "<Motion>"),
        ]);
        add("motion_to_text", &[
            ("What kind of motion is displayed in <Motion>? Describe it in text?", "<Caption>"),
            ("Describe the motion portrayed in <Motion> using words.", "<Caption>"),
        ]);
        add("motion_to_text_frame", &[
            (
                "What is happening in <Motion> during a duration of <Frame> frames?",
                "<Caption>",
            ),
            ("Describe the motion depicted in <Motion> over <Frame> frames.", "<Caption>"),
        ]);
        add("motion_to_text_second", &[
            (
                "What is the action being demonstrated in <Motion> over <Second> seconds?",
                "<Caption>",
            ),
            ("What is being demonstrated in <Motion> that is <Second> seconds long?", "<Caption>"),
        ]);
        add("motion_to_text_human", &[
            ("What is happening among <Human> humans in <Motion>?", "<Caption>"),
            ("Describe the coordinated actions of <Human> humans in <Motion>.", "<Caption>"),
        ]);
        add("motion_to_frame", &[
            (
                "What is the duration of <Motion>'s gestures in frames?",
                "There are <Frame> frames in the motion.",
            ),
            (
                "Compute the frame count for <Motion>'s body movements?",
                "The length of given motion is about <Frame> frames.",
            ),
        ]);
        add("motion_to_second", &[
            (
                "How many seconds are there in <Motion>?",
                "There are about <Second> seconds in the motion.",
            ),
            (
                "Calculate the second duration for <Motion>'s actions.",
                "The motion lasts for roughly estimated <Second> seconds.",
            ),
        ]);
        add("motion_to_human", &[
            (
                "How many people are shown in <Motion>?",
                "A total of <Human> individuals are participating.",
            ),
            (
                "Determine the number of individuals involved in <Motion>.",
                "The scene includes <Human> humans.",
            ),
        ]);
        add("caption_to_frame", &[
            (
                "Predict the frame count required for the motion corresponding to <Caption>.",
                "The motion has an estimated duration of <Frame> frames.",
            ),
            (
                "How many frames should the motion that matches <Caption> have?",
                "The total number of frames in the motion is roughly <Frame>.",
            ),
        ]);
        add("caption_to_second", &[
            (
                "Estimate the expected number of seconds required for the motion that matches <Caption>.",
                "The motion's second count is <Second>.",
            ),
            (
                "What is the expected second length for the motion that corresponds to <Caption>?",
                "The motion's second count is roughly estimated to be <Second>.",
            ),
        ]);
        add("caption_to_human", &[
            (
                "How many humans are involved in the motion described by <Caption>?",
                "The motion involves <Human> humans.",
            ),
            (
                "Determine the number of individuals participating in <Caption>.",
                "There are <Human> people in this motion.",
            ),
        ]);
        add("frame_to_caption", &[
            (
                "Based on the <Frame> frames of the motion, what is the likelihood of it being a full-body movement or a partial-body movement?",
                "<Caption>",
            ),
            (
                "Based on the motion length <Frame> frames, what is the likelihood of it being a cardiovascular or respiratory exercise?",
                "<Caption>",
            ),
        ]);
        add("second_to_caption", &[
            (
                "Given <Second> seconds of motion, what body parts are likely to be involved?",
                "<Caption>",
            ),
            (
                "Predict the type of sport or exercise that would require <Second> seconds of motion.",
                "<Caption>",
            ),
        ]);
        add("human_to_caption", &[
            (
                "Generate a description of the motion involving <Human> humans.",
                "<Caption>",
            ),
            ("What types of activities could <Human> humans perform together?", "<Caption>"),
        ]);
        add("random_caption", &[
            (
                "Write a brief summary of how someone might move their feet while doing the foxtrot.",
                "<Caption>",
            ),
            ("Give me a motion description.", "<Caption>"),
        ]);
        add("motion_prediction", &[
            ("Predict motion: <Motion_part1>", "<Motion_part2>"),
            ("Do the motion prediction task for <Motion_part1>.", "<Motion_part2>"),
        ]);
        add("reaction_generation", &[
            ("Generate Reaction: <Motion_react1>", "<Motion_react2>"),
            ("Do the reaction generation task for <Motion_react1>.", "<Motion_react2>"),
        ]);
        add("motion_inbetween", &[
            ("Complete the masked motion: <Motion_Masked>", "<Motion>"),
            ("Here is a masked motion sequence <Motion_Masked>, complete it.", "<Motion>"),
        ]);

        TemplateRegistry { templates }
    }
}
