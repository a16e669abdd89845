fn main() -> std::process::ExitCode {
    mcas_sim::cli::main()
}
