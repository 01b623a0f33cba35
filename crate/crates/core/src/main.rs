fn main() {
    std::process::exit(rescap::cli::main_with_args(std::env::args_os()));
}
