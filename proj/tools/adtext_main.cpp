#include <iostream>

#include "adtext/cli.hpp"

int main(int argc, char** argv) {
  return adtext::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
