#include <algorithm>

#include "facematch/params.hpp"

namespace facematch::params {

const std::vector<FieldSpec>& schema() {
  static const std::vector<FieldSpec> kSchema = {
      {Field::kGender, "gender", true, false, {"Male", "Female"}},
      {Field::kAgeGroup, "age_group", true, false, {"young adult", "adult", "middle-aged", "elderly"}},
      {Field::kSkinTone, "skin_tone", true, false, {"fair", "olive", "brown", "dark"}},
      {Field::kEyeShape,
       "eye_shape",
       true,
       false,
       {"round", "almond-shaped", "hooded", "monolid", "upturned", "downturned"}},
      {Field::kEyeColor, "eye_color", true, false, {"black", "brown", "hazel", "green", "blue", "grey"}},
      {Field::kEyebrowShape, "eyebrow_shape", true, false, {"thick", "thin", "straight", "arched"}},
      {Field::kNoseShape, "nose_shape", true, false, {"button", "straight", "pointed", "aquiline", "wide"}},
      {Field::kLipShape, "lip_shape", true, false, {"full", "thin", "heart-shaped", "wide"}},
      {Field::kFaceShape, "face_shape", true, false, {"oval", "round", "square", "heart", "oblong"}},
      {Field::kJawlineShape, "jawline_shape", true, false, {"square", "rounded", "sharp", "soft"}},
      {Field::kChinShape, "chin_shape", true, false, {"pointed", "rounded", "square", "cleft"}},
      {Field::kBeard, "beard", false, true, {"full", "stubble", "goatee", "trimmed"}},
      {Field::kMoustache, "moustache", false, true, {"full", "thin", "handlebar"}},
  };
  return kSchema;
}

const FieldSpec& spec_for(Field field) { return schema()[static_cast<std::size_t>(field)]; }

std::optional<Field> field_from_key(std::string_view key) {
  const auto& s = schema();
  auto it = std::find_if(s.begin(), s.end(), [&](const FieldSpec& f) { return f.key == key; });
  if (it == s.end()) return std::nullopt;
  return it->field;
}

}  // namespace facematch::params
