#include <iostream>

#include "wregress/commands.hpp"

int main(int argc, char** argv) { return wregress::cli::run(argc, argv, std::cout, std::cerr); }
