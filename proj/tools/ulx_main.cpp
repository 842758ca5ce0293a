// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "ulx/cli.hpp"

int main(int argc, char** argv) { return ulx::cli::main(argc, argv, std::cout, std::cerr); }
