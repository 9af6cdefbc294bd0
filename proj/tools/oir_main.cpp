// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "oir/cli/commands.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return oir::cli::run_cli(args, std::cout, std::cerr);
}
