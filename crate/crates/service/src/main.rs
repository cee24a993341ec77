fn main() -> std::process::ExitCode {
    skyplan_service::cli::main()
}
