fn main() {
    std::process::exit(pbc_diffusion::cli::main_with_args(std::env::args_os()));
}
