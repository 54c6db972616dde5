#include <iostream>

#include "syncclip/cli.hpp"

int main(int argc, char** argv) {
  return syncclip::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
