#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dagevo::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfig = 2,
    kData = 3,
    kSchema = 4,
    kOther = 5,
};

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dagevo::cli
