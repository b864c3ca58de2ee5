fn main() {
    std::process::exit(peregrine::cli::cli_main(std::env::args_os()));
}
