#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace emdm {

// Exit statuses: 0 success, 1 diagnostics or violations reported, 2 usage
// or configuration error. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace emdm
