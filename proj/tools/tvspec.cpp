#include "tvspec/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return tvspec::run_cli(argc, argv, std::cout, std::cerr); }
