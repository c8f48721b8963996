#pragma once

#include <string_view>

namespace geoprobe {

// Diagnostics go to stderr; GEOPROBE_QUIET=1 silences warnings and notices.
void warn(std::string_view message);
void notice(std::string_view message);

}  // namespace geoprobe
