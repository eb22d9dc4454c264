#include <iostream>

#include "basic/cli.hpp"

int main(int argc, char** argv) { return basic::cli_main(argc, argv, std::cout, std::cerr); }
