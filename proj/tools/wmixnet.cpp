#include <iostream>

#include "wmixnet/cli.hpp"

int main(int argc, char** argv) { return wmixnet::run(argc, argv, std::cout, std::cerr); }
