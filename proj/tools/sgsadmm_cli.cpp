#include "sgsadmm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sgsadmm::cli::main(argc, argv, std::cout, std::cerr); }
