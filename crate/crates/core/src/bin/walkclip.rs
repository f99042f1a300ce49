fn main() {
    std::process::exit(walkclip::cli::main_with_args(std::env::args_os()));
}
