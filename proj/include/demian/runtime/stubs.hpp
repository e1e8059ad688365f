#pragma once

// Pluggable stand-ins for the action policy and the instructor model.

#include <algorithm>
#include <optional>
#include <string>

#include "demian/rng.hpp"

namespace demian {

// What the policy saw over one rollout, handed to it when the rollout ends.
struct RolloutView {
  int max_steps = 0;
  // 1-based step from which chunks were conditioned on the instruction.
  std::optional<int> injected_step;
};

class PolicyStub {
 public:
  virtual ~PolicyStub() = default;
  // Called at every chunk-generation instant with the active prompt.
  virtual void on_chunk(int /*chunk_index*/, int /*first_step*/, const std::string& /*prompt*/) {}
  // Success verdict for the rollout; nullopt when the stub does not model it.
  virtual std::optional<bool> finish(const RolloutView& /*view*/, Rng& /*rng*/) { return std::nullopt; }
};

// Succeeds iff the instruction reached the policy by `deadline_step`.
class DeadlinePolicy final : public PolicyStub {
 public:
  explicit DeadlinePolicy(int deadline_step) : deadline_(deadline_step) {}

  std::optional<bool> finish(const RolloutView& view, Rng&) override {
    return view.injected_step && *view.injected_step <= deadline_;
  }

 private:
  int deadline_;
};

// Success probability interpolates between the task-only and instructed
// rates by the fraction of steps executed under the instruction.
class PromptSensitivePolicy final : public PolicyStub {
 public:
  PromptSensitivePolicy(double p_task_only, double p_instructed)
      : p_task_only_(p_task_only), p_instructed_(p_instructed) {}

  std::optional<bool> finish(const RolloutView& view, Rng& rng) override {
    double covered = 0.0;
    if (view.injected_step && view.max_steps > 0) {
      covered = static_cast<double>(view.max_steps - *view.injected_step + 1) / view.max_steps;
    }
    const double p = p_task_only_ + (p_instructed_ - p_task_only_) * std::clamp(covered, 0.0, 1.0);
    return rng.uniform() < p;
  }

 private:
  double p_task_only_;
  double p_instructed_;
};

class InstructorStub {
 public:
  virtual ~InstructorStub() = default;
  virtual std::string instruct(const std::string& task_description) = 0;
};

class FixedInstructor final : public InstructorStub {
 public:
  explicit FixedInstructor(std::string text) : text_(std::move(text)) {}
  std::string instruct(const std::string&) override { return text_; }

 private:
  std::string text_;
};

// Produces a short physical-motion style hint derived from the task text.
class TemplateInstructor final : public InstructorStub {
 public:
  std::string instruct(const std::string& task_description) override {
    std::string t = task_description;
    while (!t.empty() && (t.back() == '.' || t.back() == ' ')) t.pop_back();
    if (!t.empty()) t[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(t[0])));
    return "Move the gripper steadily to " + t + ".";
  }
};

// Annotation spliced after the task prompt.
inline std::string compose_prompt(const std::string& task_prompt, const std::string& instruction) {
  if (instruction.empty()) return task_prompt;
  return task_prompt + " " + instruction;
}

}  // namespace demian
