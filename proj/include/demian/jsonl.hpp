#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "demian/error.hpp"

namespace demian::jsonl {

using nlohmann::json;

// Calls fn(line_number, line) for every non-blank line. A final line without
// a terminating newline is reported through `truncated_tail` instead of fn
// when the caller asks for crash-tolerant reading.
inline void for_each_line(const std::filesystem::path& path,
                          const std::function<void(std::size_t, const std::string&)>& fn,
                          bool drop_unterminated_tail = false,
                          bool* truncated_tail = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  if (truncated_tail) *truncated_tail = false;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) {
      if (drop_unterminated_tail) {
        if (truncated_tail) *truncated_tail = true;
        break;
      }
      nl = content.size();
    }
    std::string line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) fn(line_no, line);
    pos = nl + 1;
  }
}

// Truncates a file back to its last newline. Used to repair a sink or
// checkpoint whose writer was killed mid-line before appending to it.
inline void repair_unterminated_tail(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return;
  const auto size = std::filesystem::file_size(path);
  if (size == 0) return;
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  if (content.back() == '\n') return;
  const auto nl = content.rfind('\n');
  const auto keep = nl == std::string::npos ? 0 : nl + 1;
  std::filesystem::resize_file(path, keep);
}

inline std::vector<json> read_all(const std::filesystem::path& path) {
  std::vector<json> out;
  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

inline void write_all(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& row : rows) out << row.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace demian::jsonl
