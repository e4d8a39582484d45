#include <iostream>

#include "hierdetect/experiment.hpp"

int main(int argc, char** argv) { return hierdetect::cli::run(argc, argv, std::cout, std::cerr); }
