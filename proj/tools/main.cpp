#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
    ggan::cli::tune_allocator();
    std::vector<std::string> args(argv + 1, argv + argc);
    return ggan::cli::run(args, std::cout, std::cerr);
}
