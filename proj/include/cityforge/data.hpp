#pragma once

#include <string_view>

namespace cityforge::data {

// Generated at configure time from data/*.json.
std::string_view components_json();
std::string_view styles_json();

}  // namespace cityforge::data
