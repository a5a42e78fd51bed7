#pragma once

#include <exception>

namespace hsmgnn {

/// Process exit codes: 0 success, 1 I/O, 2 format/config/usage, 3 numerical
/// abort.
int exit_code_for(const std::exception& e);

int run_cli(int argc, char** argv);

}  // namespace hsmgnn
