#include <iostream>

#include "toolbandit/cli.hpp"

int main(int argc, char** argv) { return toolbandit::cli::run(argc, argv, std::cout, std::cerr); }
