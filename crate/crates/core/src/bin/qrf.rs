fn main() -> std::process::ExitCode {
    qrf::cli::main()
}
