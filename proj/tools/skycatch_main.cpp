#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return skycatch::cli::run_command(args, std::cout, std::cerr);
}
