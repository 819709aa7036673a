fn main() {
    std::process::exit(gan_stability_cli::run(std::env::args_os()));
}
