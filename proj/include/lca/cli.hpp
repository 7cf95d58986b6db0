#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lca {

/// Runs one neuron-lca invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on usage or validation errors, 2 on runtime errors.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_command(int argc, const char* const* argv);

}  // namespace lca
