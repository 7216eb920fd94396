#include <iostream>

#include "emdm/cli.hpp"

int main(int argc, char** argv) {
    return emdm::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
