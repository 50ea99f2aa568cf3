#include <iostream>

#include "retro/cli.hpp"

int main(int argc, char** argv) {
  return retro::cli::run_cli(argc, argv, std::cout, std::cerr);
}
