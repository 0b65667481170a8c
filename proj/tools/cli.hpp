#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lfr::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,        // unknown flag, bad value, missing required option
    kMissingInput = 3, // a file or directory could not be read or written
    kBadData = 4,      // inputs exist but are malformed or inconsistent
    kFailure = 5,      // anything else
};

// Runs `lfr <subcommand> ...`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace lfr::cli
