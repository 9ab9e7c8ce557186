// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/cli.hpp"

int main(int argc, char** argv) { return reident::cli::run({argv, argv + argc}); }
