#pragma once

// The strict caption response schema {"aspect": ..., "caption": ...} and the
// sentence-count length cap.

#include <cctype>
#include <string>
#include <string_view>

#include <json.hpp>

#include "demian/aspect.hpp"
#include "demian/error.hpp"

namespace demian {

inline constexpr int kDefaultMaxSentences = 2;

enum class CaptionErrorKind { schema_error, aspect_mismatch, length_violation };

constexpr std::string_view to_string(CaptionErrorKind k) {
  switch (k) {
    case CaptionErrorKind::schema_error: return "schema_error";
    case CaptionErrorKind::aspect_mismatch: return "aspect_mismatch";
    case CaptionErrorKind::length_violation: return "length_violation";
  }
  return "?";
}

// A VLM completion that does not satisfy the response contract. Retryable.
class CaptionError : public Error {
 public:
  CaptionError(CaptionErrorKind kind, const std::string& message) : Error(message), kind_(kind) {}
  CaptionErrorKind kind() const { return kind_; }

 private:
  CaptionErrorKind kind_;
};

class SchemaError : public CaptionError {
 public:
  explicit SchemaError(const std::string& m) : CaptionError(CaptionErrorKind::schema_error, m) {}
};

class AspectMismatch : public CaptionError {
 public:
  explicit AspectMismatch(const std::string& m) : CaptionError(CaptionErrorKind::aspect_mismatch, m) {}
};

class LengthViolation : public CaptionError {
 public:
  explicit LengthViolation(const std::string& m) : CaptionError(CaptionErrorKind::length_violation, m) {}
};

// A sentence ends at '.', '!' or '?' followed by whitespace or end of string.
// Trailing text after the last terminator counts as one more sentence.
inline int count_sentences(std::string_view text) {
  int count = 0;
  bool pending = false;  // non-space text since the last boundary
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!std::isspace(static_cast<unsigned char>(c))) pending = true;
    if (c == '.' || c == '!' || c == '?') {
      const bool at_end = i + 1 == text.size();
      if (at_end || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
        ++count;
        pending = false;
      }
    }
  }
  return count + (pending ? 1 : 0);
}

inline bool validate_caption(std::string_view caption, int max_sentences = kDefaultMaxSentences) {
  return count_sentences(caption) <= max_sentences;
}

// Renders a caption the way a compliant model is asked to answer.
inline std::string render_response(AspectKind aspect, std::string_view caption) {
  return nlohmann::json{{"aspect", std::string(to_string(aspect))}, {"caption", std::string(caption)}}
      .dump();
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Removes one surrounding ``` fence (with an optional language tag).
inline std::string_view strip_code_fence(std::string_view s) {
  s = trim(s);
  if (s.substr(0, 3) != "```") return s;
  const auto first_nl = s.find('\n');
  if (first_nl == std::string_view::npos) return s;
  std::string_view body = s.substr(first_nl + 1);
  body = trim(body);
  if (body.size() >= 3 && body.substr(body.size() - 3) == "```") body.remove_suffix(3);
  return trim(body);
}

}  // namespace detail

inline std::string parse_response(std::string_view raw_text, AspectKind expected,
                                  int max_sentences = kDefaultMaxSentences) {
  const std::string_view body = detail::strip_code_fence(raw_text);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("response is not a single JSON object: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("response JSON is not an object");
  if (j.size() != 2 || !j.contains("aspect") || !j.contains("caption")) {
    throw SchemaError("response must have exactly the keys \"aspect\" and \"caption\"; got " + j.dump());
  }
  if (!j["aspect"].is_string() || !j["caption"].is_string()) {
    throw SchemaError("\"aspect\" and \"caption\" must be strings");
  }
  const auto aspect = j["aspect"].get<std::string>();
  if (aspect != to_string(expected)) {
    throw AspectMismatch("expected aspect '" + std::string(to_string(expected)) + "', got '" + aspect + "'");
  }
  auto caption = j["caption"].get<std::string>();
  const int n = count_sentences(caption);
  if (n > max_sentences) {
    throw LengthViolation("caption has " + std::to_string(n) + " sentences; the cap is " +
                          std::to_string(max_sentences));
  }
  return caption;
}

}  // namespace demian
