fn main() {
    std::process::exit(metroforge_harness::cli::main(std::env::args_os()));
}
