#include "hoigen/kvdoc.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hoigen/error.h"

namespace hoigen {

namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 6; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

void KvDoc::Set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find('=') != std::string::npos) {
    throw ValidationError("invalid key '" + key + "'");
  }
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KvDoc::Set(const std::string& key, double value) { Set(key, FormatDouble(value)); }

void KvDoc::Set(const std::string& key, long long value) {
  Set(key, std::to_string(value));
}

bool KvDoc::Has(const std::string& key) const { return Get(key).has_value(); }

std::optional<std::string> KvDoc::Get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string KvDoc::GetOr(const std::string& key, const std::string& fallback) const {
  return Get(key).value_or(fallback);
}

std::string KvDoc::GetString(const std::string& key) const {
  auto v = Get(key);
  if (!v) throw ParseError("missing key '" + key + "'");
  return *v;
}

double KvDoc::GetDouble(const std::string& key) const {
  const std::string s = GetString(key);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ParseError("key '" + key + "' is not a number: " + s);
  }
  return v;
}

long long KvDoc::GetInt(const std::string& key) const {
  const std::string s = GetString(key);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("key '" + key + "' is not an integer: " + s);
  }
  return v;
}

std::string KvDoc::ToString() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  return out.str();
}

KvDoc KvDoc::Parse(const std::string& text) {
  KvDoc doc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = Trim(t.substr(0, eq));
    if (key.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": empty key");
    }
    doc.Set(key, Trim(t.substr(eq + 1)));
  }
  return doc;
}

KvDoc KvDoc::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

void KvDoc::Save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << ToString();
}

}  // namespace hoigen
