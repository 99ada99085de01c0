#ifndef DSPAR_CLI_HPP
#define DSPAR_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dspar {

/// Exit codes: 0 success, 1 runtime/closure error, 2 validation error.
int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace dspar

#endif
