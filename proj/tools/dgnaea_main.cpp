#include <iostream>

#include "dgnaea/cli.hpp"

int main(int argc, char** argv) {
    return dgnaea::run_cli(argc, argv, std::cout, std::cerr);
}
