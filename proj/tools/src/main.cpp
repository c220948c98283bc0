#include <iostream>
#include <string>
#include <vector>

#include "ddfe_cli/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return ddfe::cli::run(args, std::cout, std::cerr);
}
