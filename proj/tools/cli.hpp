#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ovma::cli {

/// Exit codes: 0 pass, 1 contract breach or module error, 2 usage error.
/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Splices the options of a JSON config file (or a run manifest) into args.
/// Keys mirror flag names with '-' replaced by '_'; flags given explicitly
/// on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace ovma::cli
