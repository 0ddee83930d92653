#include <iostream>

#include "fdm/cli.hpp"

int main(int argc, char** argv) {
  return fdm::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
