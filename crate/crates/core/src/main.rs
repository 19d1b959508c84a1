fn main() {
    std::process::exit(met_dgldpc::cli::main_with_args(std::env::args_os()));
}
