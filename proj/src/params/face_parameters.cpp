#include <algorithm>
#include <sstream>

#include "facematch/params.hpp"
#include "facematch/text.hpp"

namespace facematch::params {

std::string_view issue_code(IssueKind kind) {
  switch (kind) {
    case IssueKind::kUnknownField:
      return "UnknownField";
    case IssueKind::kInvalidValue:
      return "InvalidValue";
    case IssueKind::kInconsistentSelection:
      return "InconsistentSelection";
  }
  return "InvalidValue";
}

std::string Issue::describe() const {
  switch (kind) {
    case IssueKind::kUnknownField:
      return "unknown field '" + field + "'";
    case IssueKind::kInconsistentSelection:
      return "field '" + field + "' is only allowed when gender is Male";
    case IssueKind::kInvalidValue:
      break;
  }
  std::string head = value.empty() ? "missing required field '" + field + "'"
                                   : "invalid value '" + value + "' for field '" + field + "'";
  return head + " (allowed: " + join(allowed, ", ") + ")";
}

namespace {

std::string summarize(const std::vector<Issue>& issues) {
  std::vector<std::string> parts;
  parts.reserve(issues.size());
  for (const auto& i : issues) parts.push_back(i.describe());
  return "invalid face parameters: " + join(parts, "; ");
}

std::vector<std::string> allowed_list(const FieldSpec& spec) {
  return {spec.allowed.begin(), spec.allowed.end()};
}

}  // namespace

ParameterError::ParameterError(std::vector<Issue> issues)
    : Error(std::string(issues.empty() ? "InvalidValue" : issue_code(issues.front().kind)),
            summarize(issues)),
      issues_(std::move(issues)) {}

FaceParameters validate_parameters(const std::map<std::string, std::string>& raw) {
  std::vector<Issue> issues;
  FaceParameters out;

  for (const auto& [key, value] : raw) {
    if (!field_from_key(key)) issues.push_back({IssueKind::kUnknownField, key, value, {}});
  }

  for (const auto& spec : schema()) {
    auto it = raw.find(std::string(spec.key));
    std::string value = it == raw.end() ? std::string() : std::string(trim(it->second));
    if (value.empty()) {
      if (spec.required) {
        issues.push_back({IssueKind::kInvalidValue, std::string(spec.key), "", allowed_list(spec)});
      }
      continue;
    }
    if (std::find(spec.allowed.begin(), spec.allowed.end(), value) == spec.allowed.end()) {
      issues.push_back({IssueKind::kInvalidValue, std::string(spec.key), value, allowed_list(spec)});
      continue;
    }
    out.values_[static_cast<std::size_t>(spec.field)] = value;
  }

  if (out.get(Field::kGender) == "Female") {
    for (const auto& spec : schema()) {
      if (spec.male_only && out.has(spec.field)) {
        issues.push_back({IssueKind::kInconsistentSelection, std::string(spec.key),
                          std::string(out.get(spec.field)), {}});
      }
    }
  }

  if (!issues.empty()) throw ParameterError(std::move(issues));
  return out;
}

std::map<std::string, std::string> to_map(const FaceParameters& p) {
  std::map<std::string, std::string> out;
  for (const auto& spec : schema()) {
    if (p.has(spec.field)) out.emplace(spec.key, p.get(spec.field));
  }
  return out;
}

std::string serialize(const FaceParameters& p) {
  std::ostringstream os;
  for (const auto& spec : schema()) {
    if (p.has(spec.field)) os << spec.key << '=' << p.get(spec.field) << '\n';
  }
  return os.str();
}

std::map<std::string, std::string> parse_document(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterError({{IssueKind::kInvalidValue, "line " + std::to_string(line_no),
                             std::string(line), {"key=value"}}});
    }
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

}  // namespace facematch::params
