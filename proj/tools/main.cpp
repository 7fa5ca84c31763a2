// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "mvact/cli.hpp"

int main(int argc, char** argv) {
  return mvact::cli::run_command(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
