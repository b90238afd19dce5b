fn main() {
    std::process::exit(asgd_arena::harness::cli::main_with(std::env::args_os()));
}
