#include <iostream>

#include "cvps/harness.hpp"

int main(int argc, char** argv) { return cvps::run_cli(argc, argv, std::cout, std::cerr); }
