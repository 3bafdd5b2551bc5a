#include <iostream>

#include "wagepanel/cli.hpp"

int main(int argc, char **argv) { return wagepanel::cli::run(argc, argv, std::cout, std::cerr); }
