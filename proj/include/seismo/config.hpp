#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace seismo::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal INI document: [section] headers, key = value lines, '#' comments.
struct Ini {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static Ini parse_text(const std::string& text);
  static Ini parse_file(const std::string& path);
  std::string serialize() const;

  bool has(const std::string& section, const std::string& key) const;
  const std::string& get(const std::string& section,
                         const std::string& key) const;
  void set(const std::string& section, const std::string& key,
           const std::string& value);

  std::string get_or(const std::string& s, const std::string& k,
                     const std::string& def) const;
  double get_double(const std::string& s, const std::string& k,
                    double def) const;
  int64_t get_int(const std::string& s, const std::string& k,
                  int64_t def) const;
  bool get_bool(const std::string& s, const std::string& k, bool def) const;
};

// Resolves "section.key=value" (or a bare "key=value" unique across the
// schema) into the document. Unknown or ambiguous keys are hard errors.
void apply_override(Ini& ini, const std::string& assignment,
                    const std::vector<std::pair<std::string, std::string>>&
                        schema);

}  // namespace seismo::config
