// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/cli.h"

int main(int argc, char** argv) { return fbse::cli::Main(argc, argv); }
