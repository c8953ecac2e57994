fn main() -> std::process::ExitCode {
    gazemap::cli::run(std::env::args_os())
}
