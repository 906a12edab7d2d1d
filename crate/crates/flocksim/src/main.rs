fn main() {
    std::process::exit(flocksim::cli::main_with(std::env::args_os()));
}
