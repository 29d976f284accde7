#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sci {

// Exit codes: 0 success, 1 pipeline failure, 2 usage error.
// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace sci
