#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facematch/errors.hpp"

namespace facematch::params {

// Fields in canonical order. The order drives serialization and the
// vocabulary document; the prompt template has its own fixed order.
enum class Field : std::size_t {
  kGender,
  kAgeGroup,
  kSkinTone,
  kEyeShape,
  kEyeColor,
  kEyebrowShape,
  kNoseShape,
  kLipShape,
  kFaceShape,
  kJawlineShape,
  kChinShape,
  kBeard,
  kMoustache,
};

inline constexpr std::size_t kFieldCount = 13;

struct FieldSpec {
  Field field;
  std::string_view key;
  bool required;
  // Only present when gender is Male.
  bool male_only;
  std::vector<std::string_view> allowed;
};

// The closed vocabulary. Extending a field means adding a string here.
const std::vector<FieldSpec>& schema();
const FieldSpec& spec_for(Field field);
std::optional<Field> field_from_key(std::string_view key);

// A validated selection. Only obtainable through validate_parameters, so a
// FaceParameters value always satisfies the vocabulary and gender rules.
class FaceParameters {
 public:
  // Value of a field, or empty when an optional field is absent.
  std::string_view get(Field field) const { return values_[static_cast<std::size_t>(field)]; }
  bool has(Field field) const { return !get(field).empty(); }

  bool operator==(const FaceParameters&) const = default;

 private:
  friend FaceParameters validate_parameters(const std::map<std::string, std::string>& raw);
  std::array<std::string, kFieldCount> values_;
};

enum class IssueKind { kUnknownField, kInvalidValue, kInconsistentSelection };

struct Issue {
  IssueKind kind;
  std::string field;
  std::string value;
  std::vector<std::string> allowed;

  std::string describe() const;
};

std::string_view issue_code(IssueKind kind);

// Aggregate validation failure. code() is the code of the first issue.
class ParameterError : public Error {
 public:
  explicit ParameterError(std::vector<Issue> issues);
  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  std::vector<Issue> issues_;
};

// Keys are matched exactly (lowercase); values are trimmed. Missing or empty
// optional fields are treated as absent; missing required fields are reported
// as InvalidValue with an empty value.
FaceParameters validate_parameters(const std::map<std::string, std::string>& raw);

std::map<std::string, std::string> to_map(const FaceParameters& p);

// Flat `key=value` text, one field per line in canonical order. Absent
// optional fields are omitted.
std::string serialize(const FaceParameters& p);

// Parses the flat text form. Blank lines and `#` comments are ignored.
// Throws ParameterError(kInvalidValue) on a line without '='.
std::map<std::string, std::string> parse_document(std::string_view text);

class PromptText {
 public:
  explicit PromptText(std::string text);
  const std::string& text() const noexcept { return text_; }
  bool operator==(const PromptText&) const = default;

 private:
  std::string text_;
};

PromptText build_prompt(const FaceParameters& p);

}  // namespace facematch::params
