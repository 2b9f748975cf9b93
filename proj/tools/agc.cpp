// SPDX-License-Identifier: Apache-2.0
#include <agc/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return agc::cli::main({ argv + 1, argv + argc }, std::cout, std::cerr);
}
