#include "rydloss/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace rydloss {

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("output", "cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw ValidationError("output", "short write to '" + path + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw ValidationError("output", "cannot rename into '" + path + "': " + ec.message());
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

nlohmann::json Config::parse_value(const std::string& raw) {
  const std::string v = trim(raw);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
    return v.substr(1, v.size() - 2);
  if (v == "true") return true;
  if (v == "false") return false;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (!v.empty() && end == v.c_str() + v.size() && std::isfinite(d)) return d;
  return v;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError(where, "empty key");
    cfg.values_[section.empty() ? key : section + "." + key] = parse_value(line.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("--set", "expected key=value, got '" + assignment + "'");
  values_[trim(assignment.substr(0, eq))] = parse_value(assignment.substr(eq + 1));
}

void Config::merge(const Config& over) {
  for (const auto& [k, v] : over.values_) values_[k] = v;
}

double Config::number(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError(key, "missing");
  if (!it->second.is_number()) throw ValidationError(key, "not a number");
  return it->second.get<double>();
}

double Config::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::string Config::string_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return it->second.is_string() ? it->second.get<std::string>() : it->second.dump();
}

std::map<std::string, double> Config::medium_values() const {
  std::map<std::string, double> out;
  for (const auto& [k, v] : values_)
    if (k.find('.') == std::string::npos && v.is_number()) out[k] = v.get<double>();
  return out;
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

std::vector<double> parse_grid(const std::string& spec, const std::string& field) {
  std::vector<double> out;
  auto num = [&](const std::string& s) {
    try {
      const std::string t = trim(s);
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(field, "bad number '" + s + "'");
    }
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError(field, "expected lo:hi:step");
    const double lo = num(parts[0]), hi = num(parts[1]), step = num(parts[2]);
    if (!(step > 0.0) || hi < lo) throw ValidationError(field, "need step > 0 and hi >= lo");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    if (n > 1'000'000) throw ValidationError(field, "grid too large");
    for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');)
      if (!trim(p).empty()) out.push_back(num(trim(p)));
  }
  if (out.empty()) throw ValidationError(field, "empty grid");
  return out;
}

}  // namespace rydloss
