#include "eqlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return eqlab::cli_main(argc, argv, std::cout, std::cerr); }
