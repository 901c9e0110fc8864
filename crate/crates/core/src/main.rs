fn main() {
    std::process::exit(coherent_feedback::cli::run(std::env::args_os()));
}
