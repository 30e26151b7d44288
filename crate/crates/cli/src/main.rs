fn main() {
    std::process::exit(vrcad_cli::cli::main_with_args(std::env::args_os()));
}
