#pragma once

#include "ddml/error.hpp"

namespace ddml {

// 0 success, 1 internal, 2 configuration, 3 data, 4 numerical.
int exit_code(ErrorKind kind);

int run_cli(int argc, char** argv);

}  // namespace ddml
