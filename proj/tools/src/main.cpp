#include <iostream>
#include <string>
#include <vector>

#include "mnagt/tools/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return mnagt::cli::run(args, std::cout, std::cerr);
}
