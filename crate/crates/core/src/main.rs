fn main() {
    std::process::exit(evo_tss::cli::main_with_args(std::env::args_os()));
}
