fn main() {
    std::process::exit(ehrenfest_lab::cli::main_with(std::env::args_os()));
}
