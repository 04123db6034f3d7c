#include <iostream>

#include "flakeprobe/cli.hpp"

int main(int argc, char** argv) { return flakeprobe::run_cli(argc, argv, std::cout, std::cerr); }
