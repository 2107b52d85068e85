#include <iostream>

#include "shadowae/cli.hpp"

int main(int argc, char** argv) { return shadowae::cli::run(argc, argv, std::cout, std::cerr); }
