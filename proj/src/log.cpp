#include "geoprobe/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace geoprobe {

namespace {

bool quiet() {
    static const bool q = [] {
        const char* v = std::getenv("GEOPROBE_QUIET");
        return v != nullptr && *v != '\0' && *v != '0';
    }();
    return q;
}

std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

void warn(std::string_view message) {
    if (quiet()) return;
    std::lock_guard lock(log_mutex());
    std::cerr << "geoprobe: warning: " << message << '\n';
}

void notice(std::string_view message) {
    if (quiet()) return;
    std::lock_guard lock(log_mutex());
    std::cerr << "geoprobe: " << message << '\n';
}

}  // namespace geoprobe
