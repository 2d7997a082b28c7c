use std::process::ExitCode;

fn main() -> ExitCode {
    let env_out = std::env::var_os(chrono_squid::cli::OUT_ENV).map(Into::into);
    ExitCode::from(chrono_squid::cli::run(std::env::args_os(), env_out))
}
