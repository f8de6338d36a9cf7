#include <utility>

#include "facematch/params.hpp"

namespace facematch::params {

PromptText::PromptText(std::string text) : text_(std::move(text)) {
  if (text_.empty()) throw Error("InvalidPrompt", "prompt text must not be empty");
}

namespace {

std::string_view article_for(std::string_view word) {
  switch (word.empty() ? 'x' : word.front()) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return "an";
    default:
      return "a";
  }
}

}  // namespace

PromptText build_prompt(const FaceParameters& p) {
  auto v = [&](Field f) { return std::string(p.get(f)); };
  const std::string age = v(Field::kAgeGroup);

  std::string text = "a face of ";
  text += article_for(age);
  text += ' ' + age + ' ' + v(Field::kGender);
  text += " with " + v(Field::kSkinTone) + " skin tone";
  text += ", " + v(Field::kEyeShape) + " eye shape with " + v(Field::kEyeColor) + " eyes";
  text += ", " + v(Field::kNoseShape) + " nose";
  text += ", and " + v(Field::kLipShape) + " lips";
  text += ", " + v(Field::kEyebrowShape) + " eyebrows";
  text += ", " + v(Field::kFaceShape) + " face shape";
  text += ", " + v(Field::kJawlineShape) + " jawline";
  text += ", " + v(Field::kChinShape) + " chin";
  if (p.has(Field::kBeard)) text += ", and a " + v(Field::kBeard) + " beard";
  if (p.has(Field::kMoustache)) text += ", and a " + v(Field::kMoustache) + " moustache";
  return PromptText(std::move(text));
}

}  // namespace facematch::params
