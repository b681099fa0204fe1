#include <iostream>

#include "pipeparse/cli.hpp"

int main(int argc, char** argv) { return pipeparse::cli::run(argc, argv, std::cout, std::cerr); }
