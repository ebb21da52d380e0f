#include <iostream>

#include "droopsim/cli.hpp"

int main(int argc, char** argv) { return droopsim::cli::run_cli(argc, argv, std::cout, std::cerr); }
