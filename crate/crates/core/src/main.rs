fn main() -> std::process::ExitCode {
    aerotwin::cli::main()
}
