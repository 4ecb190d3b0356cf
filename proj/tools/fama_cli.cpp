// SPDX-License-Identifier: Apache-2.0
#include "fama/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return fama::runCli(args, std::cout, std::cerr);
}
