#include <iostream>

#include "wum/gateway.hpp"

int main(int argc, char** argv) { return wum::run_command(argc, argv, std::cout, std::cerr); }
