#include "cowpose/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cowpose::run_cli(argc, argv, std::cout, std::cerr); }
