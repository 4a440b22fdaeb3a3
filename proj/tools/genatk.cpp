#include <iostream>
#include <string>
#include <vector>

#include "genatk/cli.hpp"

int main(int argc, char** argv) {
  return genatk::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
