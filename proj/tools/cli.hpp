#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace audita::cli {

    inline constexpr int exit_ok = 0;
    inline constexpr int exit_failure = 1;
    inline constexpr int exit_usage = 2;

    // args excludes the program name. Failures print one line
    // "error: <kind>: <detail>" to err.
    int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}
