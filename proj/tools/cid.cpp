#include <iostream>

#include "cid/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cid::run_cli(args, std::cout, std::cerr);
}
