#include <iostream>

#include "ebm/cli.hpp"

int main(int argc, char** argv) { return ebm::cli::run(argc, argv, std::cout, std::cerr); }
