#include "seismo/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace seismo::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Ini Ini::parse_text(const std::string& text) {
  Ini ini;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config: malformed section header at line " +
                          std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      ini.sections[section];  // create
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " +
                        std::to_string(lineno) + ": '" + t + "'");
    if (section.empty())
      throw ConfigError("config: key outside any section at line " +
                        std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: empty key at line " + std::to_string(lineno));
    ini.sections[section][key] = value;
  }
  return ini;
}

Ini Ini::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

std::string Ini::serialize() const {
  std::ostringstream out;
  for (const auto& [section, kv] : sections) {
    out << "[" << section << "]\n";
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    out << "\n";
  }
  return out.str();
}

bool Ini::has(const std::string& section, const std::string& key) const {
  auto it = sections.find(section);
  return it != sections.end() && it->second.count(key) > 0;
}

const std::string& Ini::get(const std::string& section,
                            const std::string& key) const {
  auto it = sections.find(section);
  if (it == sections.end() || !it->second.count(key))
    throw ConfigError("config: missing key " + section + "." + key);
  return it->second.at(key);
}

void Ini::set(const std::string& section, const std::string& key,
              const std::string& value) {
  sections[section][key] = value;
}

std::string Ini::get_or(const std::string& s, const std::string& k,
                        const std::string& def) const {
  return has(s, k) ? get(s, k) : def;
}

double Ini::get_double(const std::string& s, const std::string& k,
                       double def) const {
  if (!has(s, k)) return def;
  try {
    size_t pos = 0;
    const double v = std::stod(get(s, k), &pos);
    if (pos != get(s, k).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + s + "." + k + " is not a number: '" +
                      get(s, k) + "'");
  }
}

int64_t Ini::get_int(const std::string& s, const std::string& k,
                     int64_t def) const {
  if (!has(s, k)) return def;
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(get(s, k), &pos);
    if (pos != get(s, k).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + s + "." + k + " is not an integer: '" +
                      get(s, k) + "'");
  }
}

bool Ini::get_bool(const std::string& s, const std::string& k, bool def) const {
  if (!has(s, k)) return def;
  std::string v = get(s, k);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: " + s + "." + k + " is not a boolean: '" + v +
                    "'");
}

void apply_override(
    Ini& ini, const std::string& assignment,
    const std::vector<std::pair<std::string, std::string>>& schema) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override: expected key=value, got '" + assignment +
                      "'");
  std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    const std::string section = key.substr(0, dot);
    const std::string name = key.substr(dot + 1);
    const bool known =
        std::any_of(schema.begin(), schema.end(), [&](const auto& e) {
          return e.first == section && e.second == name;
        });
    if (!known)
      throw ConfigError("override: unknown config key '" + key + "'");
    ini.set(section, name, value);
    return;
  }
  // bare key: must be unique across the schema
  std::vector<std::string> matches;
  for (const auto& [section, name] : schema)
    if (name == key) matches.push_back(section);
  if (matches.empty())
    throw ConfigError("override: unknown config key '" + key + "'");
  if (matches.size() > 1) {
    std::string msg = "override: ambiguous key '" + key + "' (qualify as ";
    for (size_t i = 0; i < matches.size(); ++i)
      msg += (i ? " or " : "") + matches[i] + "." + key;
    throw ConfigError(msg + ")");
  }
  ini.set(matches[0], key, value);
}

}  // namespace seismo::config
