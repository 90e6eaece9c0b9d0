fn main() {
    std::process::exit(carriergame::cli::main_with_args(std::env::args_os()));
}
