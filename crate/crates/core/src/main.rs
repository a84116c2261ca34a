fn main() {
    std::process::exit(gpt_kit::cli::run(std::env::args_os()));
}
