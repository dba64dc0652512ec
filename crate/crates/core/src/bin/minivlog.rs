// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(minisim::compile_main(std::env::args().skip(1)));
}
