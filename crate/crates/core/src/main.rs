fn main() {
    std::process::exit(resolvent_lab::cli::main_with_args(std::env::args_os()));
}
