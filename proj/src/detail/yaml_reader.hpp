#pragma once

// Small helpers around yaml-cpp that turn every failure into an
// Error(kParse) of the form "<path>:<line>: <key>: <problem>".

#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "fcto/error.hpp"
#include "fcto/manifold.hpp"

namespace fcto::detail {

class YamlReader {
 public:
  /// Loads a file; missing files raise Error(kIo), syntax errors Error(kParse).
  explicit YamlReader(std::string path);
  /// Parses an in-memory document; `path` is only used in messages.
  YamlReader(std::string path, const std::string& text);

  const YAML::Node& root() const { return root_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const YAML::Node& node, const std::string& key,
                         const std::string& problem) const;

  YAML::Node require(const YAML::Node& map, const std::string& key,
                     const std::string& context) const;
  bool has(const YAML::Node& map, const std::string& key) const;

  double number(const YAML::Node& node, const std::string& context) const;
  int integer(const YAML::Node& node, const std::string& context) const;
  std::string string(const YAML::Node& node, const std::string& context) const;
  bool boolean(const YAML::Node& node, const std::string& context) const;
  Vector3 vector3(const YAML::Node& node, const std::string& context) const;
  std::vector<double> numbers(const YAML::Node& node, const std::string& context) const;

  double number(const YAML::Node& map, const std::string& key, const std::string& context,
                double fallback) const;

 private:
  int line_of(const YAML::Node& node) const;

  std::string path_;
  YAML::Node root_;
};

}  // namespace fcto::detail
