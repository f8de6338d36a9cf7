#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace facematch {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace facematch
