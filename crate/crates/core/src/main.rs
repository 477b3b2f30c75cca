fn main() -> std::process::ExitCode {
    windpost::cli::main()
}
