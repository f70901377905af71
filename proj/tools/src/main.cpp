#include <iostream>

#include "ccan_cli/cli.hpp"

int main(int argc, char** argv) { return ccan::cli::run(argc, argv, std::cout, std::cerr); }
