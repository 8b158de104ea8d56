#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fewshot {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Flat key-value document.
///
///   # comment            (also after a value: key = value  # note)
///   key = value
///   [row <label>]        starts a named section; later keys belong to it
///
/// Keys are unique within a section. Whitespace around keys and values is
/// trimmed; values run to the end of the line.
struct KeyValueDocument {
  struct Section {
    std::string kind;
    std::string name;
    KeyValues entries;
  };

  KeyValues base;
  std::vector<Section> sections;
};

KeyValueDocument parse_key_values(std::istream& in);
KeyValueDocument parse_key_values_file(const std::filesystem::path& path);

/// Splits "key=value" (as given on the command line).
std::pair<std::string, std::string> split_assignment(const std::string& text);

}  // namespace fewshot
