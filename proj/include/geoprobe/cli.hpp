#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace geoprobe::cli {

// Exit codes returned by run().
inline constexpr int exit_ok = 0;
inline constexpr int exit_computation = 1;
inline constexpr int exit_usage = 2;

// Parses `args` (without the program name) and executes one subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace geoprobe::cli
