fn main() -> std::process::ExitCode {
    pocs_deblur::cli::run(std::env::args_os())
}
