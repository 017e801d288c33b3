#include "lirr/keyvalue.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lirr/errors.hpp"

namespace lirr {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError("invalid number '" + s + "' for " + what);
  }
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError("invalid integer '" + s + "' for " + what);
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(origin, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(origin, lineno, "empty key");
    if (!section.empty()) key = section + "." + key;
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  if (!values_.contains(key)) order_.push_back(key);
  values_[key] = value;
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_double(*v, key) : fallback;
}

std::int64_t KeyValueFile::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  return v ? parse_int(*v, key) : fallback;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true") return true;
  if (*v == "false") return false;
  throw ConfigError("expected true/false for " + key + ", got '" + *v + "'");
}

std::vector<std::string> KeyValueFile::get_list(const std::string& key) const {
  std::vector<std::string> out;
  auto v = get(key);
  if (!v || v->empty()) return out;
  for (const auto& item : split(*v, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw ConfigError("empty list element in " + key);
    out.push_back(t);
  }
  return out;
}

std::vector<double> KeyValueFile::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key)) out.push_back(parse_double(s, key));
  return out;
}

std::vector<std::int64_t> KeyValueFile::get_int_list(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& s : get_list(key)) out.push_back(parse_int(s, key));
  return out;
}

std::string KeyValueFile::to_string() const {
  std::vector<std::string> sections;
  for (const auto& k : order_) {
    const auto dot = k.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
    bool seen = false;
    for (const auto& s : sections) seen = seen || s == sec;
    if (!seen) sections.push_back(sec);
  }
  std::ostringstream out;
  for (const auto& sec : sections) {
    if (!sec.empty()) out << "[" << sec << "]\n";
    for (const auto& k : order_) {
      const auto dot = k.find('.');
      const std::string ks = dot == std::string::npos ? "" : k.substr(0, dot);
      if (ks != sec) continue;
      out << (sec.empty() ? k : k.substr(dot + 1)) << " = " << values_.at(k) << "\n";
    }
  }
  return out.str();
}

void KeyValueFile::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_string();
}

}  // namespace lirr
