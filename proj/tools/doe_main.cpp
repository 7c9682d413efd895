#include <iostream>
#include <string>
#include <vector>

#include "doe/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return doe::cli::run(args, std::cout, std::cerr);
}
