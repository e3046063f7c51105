#include <iostream>
#include <string>
#include <vector>

#include "oasfim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return oasfim::cli::dispatch(args, std::cout, std::cerr);
}
