// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/app/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return dynmap::app::run_cli(argc, argv, std::cout, std::cerr); }
