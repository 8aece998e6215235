#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace crt {

struct KeyInfo {
  std::string key;  // "section.name"
  std::string def;
  std::string doc;
};

/// Sectioned key = value configuration with a fixed schema; unknown keys are rejected.
class Config {
 public:
  static const std::vector<KeyInfo>& schema();
  static Config defaults();
  /// Built-in presets: toy_affine, toy_noncontractive.
  static Config preset(const std::string& name);
  static bool is_preset(const std::string& name);
  static Config from_file(const std::string& path);
  static Config from_text(const std::string& text, const std::string& origin = "<text>");
  /// Preset name or file path.
  static Config load(const std::string& spec);

  void set(const std::string& key, const std::string& value);
  void merge_text(const std::string& text, const std::string& origin);

  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  std::string dump() const;
  std::uint64_t hash() const;
  std::string origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_ = "defaults";
};

std::string hex64(std::uint64_t v);

}  // namespace crt
