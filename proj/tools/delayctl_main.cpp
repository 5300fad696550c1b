#include <iostream>

#include "delayctl/cli.hpp"

int main(int argc, char** argv) {
    return delayctl::run_cli(argc, argv, std::cout, std::cerr);
}
