#include <iostream>

#include "epinuts/cli.hpp"

int main(int argc, char** argv) { return epinuts::cli::run(argc, argv, std::cout, std::cerr); }
