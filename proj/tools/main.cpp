#include <iostream>
#include <string>
#include <vector>

#include "dspar/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dspar::cli_main(std::move(args), std::cout, std::cerr);
}
