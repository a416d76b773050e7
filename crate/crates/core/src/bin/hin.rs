fn main() {
    std::process::exit(hin_embed::cli::run(std::env::args_os()));
}
