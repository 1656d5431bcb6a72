// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "prunesearch/commands.hpp"

int main(int argc, char** argv) {
  return prunesearch::run_cli(argc, argv, std::cout, std::cerr);
}
