#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vcbf {

// Runs one command line (without the program name). Results go to `out` or
// to --out; errors go to `err` as {"error":{"kind":..,"message":..}}.
// Returns 0 on success, 2 for input, usage and I/O errors, 3 for domain and
// hyperparameter errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vcbf
