#include <iostream>
#include <string>
#include <vector>

#include "orts/cli.hpp"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return orts::run_cli(args, std::cout, std::cerr);
}
