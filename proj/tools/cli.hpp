#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace spde::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitConfig = 2;

/// Flat `key = value` lines; '#' starts a comment. Underscores in keys become hyphens.
/// Throws ConfigError on a malformed line or a repeated key.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace spde::cli
