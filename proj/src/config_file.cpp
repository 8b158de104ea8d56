#include "fewshot/config_file.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace fewshot {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string error_at(std::size_t line, const std::string& message) {
  return "config line " + std::to_string(line) + ": " + message;
}

}  // namespace

KeyValueDocument parse_key_values(std::istream& in) {
  KeyValueDocument doc;
  KeyValues* current = &doc.base;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(error_at(line_no, "unterminated section header"));
      const std::string inner = trim(line.substr(1, line.size() - 2));
      const auto space = inner.find_first_of(" \t");
      KeyValueDocument::Section section;
      section.kind = inner.substr(0, space);
      section.name = space == std::string::npos ? std::string{} : trim(inner.substr(space));
      if (section.kind.empty()) throw ConfigError(error_at(line_no, "empty section header"));
      doc.sections.push_back(std::move(section));
      current = &doc.sections.back().entries;
      seen.clear();
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(error_at(line_no, "expected key = value"));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(error_at(line_no, "empty key"));
    if (!seen.insert(key).second) throw ConfigError(error_at(line_no, "duplicate key '" + key + "'"));
    current->emplace_back(std::move(key), std::move(value));
  }
  return doc;
}

KeyValueDocument parse_key_values_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_key_values(in);
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + text + "'");
  auto key = trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError("empty key in '" + text + "'");
  return {key, trim(text.substr(eq + 1))};
}

}  // namespace fewshot
