// Copyright 2026 The tweezer-gates Authors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(tweezer_gates::cli::main_with_args(std::env::args_os()));
}
