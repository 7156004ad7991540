#pragma once

#include <map>
#include <string>

#include "rclab/rcmodel.hpp"

namespace rclab {

// free | wired | mixed:<classes> with classes split by ';', sites within a
// class by '+', coordinates by ','. Every site needs exactly d coordinates.
BoundaryCondition parse_bc(const std::string& s, int d);

// Flat key=value lines; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_config_file(const std::string& text);

// Experiment runner behind the rclab binary. Returns the exit code:
// 0 ok, 2 configuration error, 3 enumeration cap exceeded, 4 estimator
// failure. Errors print one JSON object per line on stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace rclab
