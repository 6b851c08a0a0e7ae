#pragma once

#include <ostream>

namespace general {

/// Command-line entry point. Returns 0 on success, 1 on usage or validation errors,
/// 2 on runtime failures.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace general
