fn main() {
    std::process::exit(oorl::cli::main_with(std::env::args_os()));
}
