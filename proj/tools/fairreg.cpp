#include <iostream>

#include "fairreg/cli.hpp"

int main(int argc, char** argv) { return fairreg::run_cli(argc, argv, std::cout, std::cerr); }
