#include <iostream>
#include <string>
#include <vector>

#include "feel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return feel::cli::run(args, std::cout, std::cerr);
}
