#pragma once

// Per-aspect prompt templates and prompt assembly. Robot corpora (RoboCasa
// 365, MolmoBot/MolmoSpaces) share the agent-centric set; EgoVerse uses the
// human-egocentric set.

#include <string>
#include <string_view>

#include "demian/annotation/schema.hpp"
#include "demian/aspect.hpp"
#include "demian/error.hpp"
#include "demian/ingestion.hpp"

namespace demian {

enum class PromptSet { robot, egocentric };

constexpr std::string_view to_string(PromptSet p) {
  return p == PromptSet::robot ? "robot" : "egocentric";
}

constexpr PromptSet prompt_set_for(Dataset d) {
  return d == Dataset::egoverse ? PromptSet::egocentric : PromptSet::robot;
}

constexpr std::string_view aspect_template(PromptSet set, AspectKind aspect) {
  if (set == PromptSet::robot) {
    switch (aspect) {
      case AspectKind::physical_motion:
        return "Describe the physical movement of the agent. For example, if the agent is moving its "
               "arm, describe the movement of the arm. If the agent is moving its hand (or the gripper "
               "of a robot arm), describe the movement of the hand or the gripper. If the agent is "
               "grasping the object, describe the grasping movement of the gripper or hand. If the agent "
               "is moving the object, describe the movement of the object. Focus only on the movements "
               "within the given frames. Do not hallucinate or make up the action.";
      case AspectKind::scene_composition:
        return "Describe the physical environment shown in the video. List the room type, major "
               "fixtures, and visible objects on the surfaces (such as specific food items, appliances, "
               "or tools).";
      case AspectKind::arm_pose:
        return "Describe the exact physical posture and spatial location of the agent's arm throughout "
               "the trajectory. Focus strictly on the arm's pose (posture, gripper state, orientation) "
               "relative to the environment at the start, middle, and end of the clip, without "
               "describing the action itself.";
      case AspectKind::reasoning:
        return "Reason about the agent's action and environment in the video clips given the task "
               "description. The reasoning should be detailed and specific to the video clips, e.g., why "
               "the agent is doing this action, what is the goal of the action, what was the previous "
               "action, what was the current action, what should be the next action, is the task "
               "completed, etc.";
    }
  } else {
    switch (aspect) {
      case AspectKind::physical_motion:
        return "Describe the physical movements of the person's hands in this clip. Focus on what each "
               "hand is doing: reaching, grasping, lifting, pouring, stirring, placing, etc. Mention the "
               "objects being manipulated and the direction of movement. Focus only on the movements "
               "within the given frames. Do not hallucinate or make up actions.";
      case AspectKind::scene_composition:
        return "Describe the physical environment shown in the images. List the setting, workspace "
               "surfaces, and visible objects (such as tools, containers, food items, or appliances). "
               "Note their spatial arrangement.";
      case AspectKind::arm_pose:
        return "Describe the exact position and posture of the person's hands at the very first frame. "
               "What are they holding, touching, or hovering over? Focus strictly on the hands' state "
               "relative to the objects and workspace, without describing the action.";
      case AspectKind::reasoning:
        return "Reason about what the person is doing and why, given the task description and the "
               "current action annotation. What is the goal of this action segment? What was likely done "
               "before this, and what will likely come next? Is this a preparatory step, the main "
               "manipulation, or a cleanup step?";
    }
  }
  return "";
}

inline constexpr std::string_view kSystemPrompt =
    "You annotate short demonstration clips for robot policy training. Answer only with the requested "
    "JSON object.";

inline std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

// Context lines; empty fields are left out entirely.
inline std::string render_context(const Segment& seg, AspectKind aspect) {
  const ContextBlock& c = seg.context;
  std::string out = "Context:\n";
  out += "Task description: " + c.task_description + "\n";
  if (!seg.label.empty() && seg.label != c.task_description) out += "Segment label: " + seg.label + "\n";
  if (!c.scene_descriptor.empty()) out += "Scene: " + c.scene_descriptor + "\n";
  if (!c.object_list.empty()) out += "Objects: " + join(c.object_list, ", ") + "\n";
  if (c.prev_label) out += "Previous segment: " + *c.prev_label + "\n";
  if (c.next_label) out += "Next segment: " + *c.next_label + "\n";
  if (aspect == AspectKind::reasoning && seg.dataset == Dataset::robocasa365 &&
      !c.primitive_sequence.empty()) {
    out += "Primitive sequence: " + join(c.primitive_sequence, " -> ") + "\n";
  }
  return out;
}

inline std::string output_directive(AspectKind aspect, int max_sentences = kDefaultMaxSentences) {
  return "Respond with exactly one JSON object and nothing else, using this schema: "
         "{\"aspect\": \"" + std::string(to_string(aspect)) +
         "\", \"caption\": \"<annotation>\"}. The caption must be at most " +
         std::to_string(max_sentences) + (max_sentences == 1 ? " sentence." : " sentences.");
}

inline std::string build_prompt(const Segment& seg, AspectKind aspect, PromptSet set,
                                int max_sentences = kDefaultMaxSentences) {
  if (set != prompt_set_for(seg.dataset)) {
    throw ConfigError("prompt set '" + std::string(to_string(set)) + "' does not match dataset '" +
                      std::string(to_string(seg.dataset)) + "'");
  }
  std::string prompt = render_context(seg, aspect);
  prompt += "\nInstruction:\n";
  prompt += aspect_template(set, aspect);
  prompt += "\n\nOutput format:\n";
  prompt += output_directive(aspect, max_sentences);
  return prompt;
}

// Appended on a retry after a rejected completion.
inline std::string corrective_suffix(CaptionErrorKind kind, int max_sentences = kDefaultMaxSentences) {
  switch (kind) {
    case CaptionErrorKind::length_violation:
      return "\n\nYour previous answer was too long. Use at most " + std::to_string(max_sentences) +
             " sentences.";
    case CaptionErrorKind::aspect_mismatch:
      return "\n\nYour previous answer used the wrong \"aspect\" value. Copy the aspect exactly as given.";
    case CaptionErrorKind::schema_error:
      return "\n\nYour previous answer was not a single valid JSON object with exactly the keys "
             "\"aspect\" and \"caption\". Output only that JSON object.";
  }
  return "";
}

}  // namespace demian
