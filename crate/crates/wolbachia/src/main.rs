fn main() -> std::process::ExitCode {
    wolbachia::cli::main()
}
