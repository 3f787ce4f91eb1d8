#include <iostream>

#include "rfbsde/commands.hpp"

int main(int argc, char** argv) { return rfbsde::run_cli(argc, argv, std::cout, std::cerr); }
