#include <iostream>

#include "drift/cli.hpp"

int main(int argc, char** argv) {
  return drift::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
