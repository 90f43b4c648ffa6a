fn main() -> std::process::ExitCode {
    musevo::cli::main()
}
