fn main() {
    std::process::exit(tmvn::cli::main_with_args(std::env::args_os()));
}
