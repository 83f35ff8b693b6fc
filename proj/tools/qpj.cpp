#include <iostream>

#include "qpj/cli.hpp"

int main(int argc, char** argv) { return qpj::cli::run(argc, argv, std::cout, std::cerr); }
