#include <iostream>

#include "vcbf/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vcbf::run_cli(args, std::cout, std::cerr);
}
