fn main() -> std::process::ExitCode {
    asset_scout::cli::main()
}
