#include "megphone/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return megphone::run_cli(argc, argv, std::cout, std::cerr); }
