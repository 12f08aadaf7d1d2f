#include <iostream>

#include "musprune/cli.hpp"

int main(int argc, char** argv) { return musprune::run_cli(argc, argv, std::cout, std::cerr); }
