#include <iostream>

#include "spanens/cli.hpp"

int main(int argc, char** argv) { return spanens::cli::run(argc, argv, std::cout, std::cerr); }
