#include "detail/yaml_reader.hpp"

#include <filesystem>
#include <sstream>

namespace fcto::detail {

namespace {

std::string join(const std::string& context, const std::string& key) {
  return context.empty() ? key : context + "." + key;
}

}  // namespace

YamlReader::YamlReader(std::string path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) {
    throw Error(ErrorCode::kIo, path_ + ": file not found");
  }
  try {
    root_ = YAML::LoadFile(path_);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::kParse,
                path_ + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  } catch (const YAML::BadFile&) {
    throw Error(ErrorCode::kIo, path_ + ": cannot open file");
  }
  if (!root_.IsMap()) {
    throw Error(ErrorCode::kParse, path_ + ":1: expected a mapping at the top level");
  }
}

YamlReader::YamlReader(std::string path, const std::string& text) : path_(std::move(path)) {
  try {
    root_ = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::kParse,
                path_ + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root_.IsMap()) {
    throw Error(ErrorCode::kParse, path_ + ":1: expected a mapping at the top level");
  }
}

int YamlReader::line_of(const YAML::Node& node) const {
  const YAML::Mark mark = node.Mark();
  return mark.is_null() ? 0 : mark.line + 1;
}

void YamlReader::fail(const YAML::Node& node, const std::string& key,
                      const std::string& problem) const {
  std::ostringstream os;
  os << path_ << ":" << line_of(node) << ": " << key << ": " << problem;
  throw Error(ErrorCode::kParse, os.str());
}

bool YamlReader::has(const YAML::Node& map, const std::string& key) const {
  return map.IsMap() && map[key].IsDefined() && !map[key].IsNull();
}

YAML::Node YamlReader::require(const YAML::Node& map, const std::string& key,
                               const std::string& context) const {
  if (!map.IsMap()) fail(map, context, "expected a mapping");
  YAML::Node node = map[key];
  if (!node.IsDefined() || node.IsNull()) fail(map, join(context, key), "missing key");
  return node;
}

double YamlReader::number(const YAML::Node& node, const std::string& context) const {
  if (!node.IsScalar()) fail(node, context, "expected a number");
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail(node, context, "expected a number, got '" + node.Scalar() + "'");
  }
}

int YamlReader::integer(const YAML::Node& node, const std::string& context) const {
  if (!node.IsScalar()) fail(node, context, "expected an integer");
  try {
    return node.as<int>();
  } catch (const YAML::Exception&) {
    fail(node, context, "expected an integer, got '" + node.Scalar() + "'");
  }
}

std::string YamlReader::string(const YAML::Node& node, const std::string& context) const {
  if (!node.IsScalar()) fail(node, context, "expected a string");
  return node.Scalar();
}

bool YamlReader::boolean(const YAML::Node& node, const std::string& context) const {
  if (!node.IsScalar()) fail(node, context, "expected true or false");
  try {
    return node.as<bool>();
  } catch (const YAML::Exception&) {
    fail(node, context, "expected true or false, got '" + node.Scalar() + "'");
  }
}

std::vector<double> YamlReader::numbers(const YAML::Node& node, const std::string& context) const {
  if (!node.IsSequence()) fail(node, context, "expected a list of numbers");
  std::vector<double> out;
  out.reserve(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.push_back(number(node[i], context + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vector3 YamlReader::vector3(const YAML::Node& node, const std::string& context) const {
  const std::vector<double> v = numbers(node, context);
  if (v.size() != 3) fail(node, context, "expected 3 numbers, got " + std::to_string(v.size()));
  return Vector3(v[0], v[1], v[2]);
}

double YamlReader::number(const YAML::Node& map, const std::string& key,
                          const std::string& context, double fallback) const {
  if (!has(map, key)) return fallback;
  return number(map[key], join(context, key));
}

}  // namespace fcto::detail
