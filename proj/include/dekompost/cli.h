#pragma once

#include <iostream>

namespace dekompost::cli {

// Exit codes: 0 ok, 1 usage error, 2 data error.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace dekompost::cli
