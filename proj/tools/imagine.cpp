#include <iostream>

#include "imagine/cli.hpp"

int main(int argc, char** argv) { return imagine::cli::run_cli(argc, argv, {std::cout, std::cerr}); }
