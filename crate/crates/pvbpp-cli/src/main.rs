use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use pvbpp_cli::client::{self, ClientError};
use pvbpp_cli::config::{resolve_max_age, resolve_policy, FileConfig};
use pvbpp_cli::server::{Server, ServerConfig, DEFAULT_MAX_REAL_DELAY_SECS};
use pvbpp_core::attack::{
    compare_policies, comparison_csv, dictionary_attack, forge_attack, forge_attack_with_known_key,
    replay_attack, AttackReport, DictionaryMode,
};
use pvbpp_core::crypto::{ServerSecret, SessionKey};
use pvbpp_core::netsim::{ChannelKind, Simulation};
use pvbpp_core::store::{register_user, StoreError, UserStore};
use pvbpp_core::throttle::DelayPolicy;

const EXIT_OK: i32 = 0;
const EXIT_INVALID: i32 = 1;
const EXIT_TRANSPORT: i32 = 2;
const EXIT_USAGE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "pvbpp",
    version,
    about = "Challenge-response login with a stateless throttling verifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the authentication server.
    Serve(ServeArgs),
    /// Add an account to a store file.
    Register(RegisterArgs),
    /// Attempt one login against a running server.
    Login(LoginArgs),
    /// Run an adversary against an in-process simulated server.
    Attack(AttackArgs),
    /// Compare delay policies against the same dictionary attack.
    Report(ReportArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Address to listen on, host:port (port 0 picks a free port).
    #[arg(long)]
    bind: String,
    /// Account store file.
    #[arg(long)]
    store: PathBuf,
    /// Server secret file: one line of 64 hex characters.
    #[arg(long)]
    secret: PathBuf,
    /// Delay policy spec, e.g. exp:2:cap20, ts:2:alpha1, none.
    #[arg(long)]
    policy: Option<String>,
    /// Optional key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Maximum cookie age in seconds.
    #[arg(long)]
    max_age: Option<u64>,
    /// Ceiling on real-time enforced waits, in seconds.
    #[arg(long, default_value_t = DEFAULT_MAX_REAL_DELAY_SECS)]
    max_real_delay: u64,
}

#[derive(Args)]
struct RegisterArgs {
    /// Account store file (created if missing).
    #[arg(long)]
    store: PathBuf,
    /// Username to add.
    user: String,
    /// Password; prompted on stdin when omitted.
    #[arg(long)]
    password: Option<String>,
}

#[derive(Args)]
struct LoginArgs {
    /// Server address, host:port.
    #[arg(long)]
    server: String,
    /// Username to authenticate as.
    user: String,
    /// Password; prompted on stdin when omitted.
    #[arg(long)]
    password: Option<String>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(subcommand)]
    kind: AttackKind,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Echo the verdict's counter and pay each prescribed wait.
    Carry,
    /// Open a fresh session per guess (documents the counter-reset gap).
    Fresh,
}

#[derive(Subcommand)]
enum AttackKind {
    /// Online dictionary attack against one account.
    Dictionary {
        /// Size of the synthetic word list.
        #[arg(long, default_value_t = 10)]
        words: usize,
        /// Read the word list from a file instead (one word per line).
        #[arg(long)]
        wordlist: Option<PathBuf>,
        /// Make this word the account's real password; absent by default.
        #[arg(long)]
        target_index: Option<usize>,
        #[arg(long, default_value = "victim")]
        username: String,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Carry)]
        mode: ModeArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the per-attempt JSON-lines log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Record honest sessions and replay each captured proof.
    Replay {
        #[arg(long, default_value_t = 100)]
        sessions: u64,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Forge proofs from eavesdropped traffic with random key guesses.
    Forge {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Control condition: hand the attacker the true session key.
        #[arg(long)]
        control: bool,
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// Comma-separated policy specs to compare.
    #[arg(long, default_value = "none,exp:2:cap20")]
    policies: String,
    /// Size of the synthetic dictionary (target absent).
    #[arg(long, default_value_t = 10)]
    words: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Serve(args) => run_serve(args),
        Command::Register(args) => run_register(args),
        Command::Login(args) => run_login(args),
        Command::Attack(args) => run_attack(args),
        Command::Report(args) => run_report(args),
    };
    std::process::exit(code);
}

fn load_file_config(path: Option<&PathBuf>) -> Result<Option<FileConfig>, i32> {
    match path {
        None => Ok(None),
        Some(path) => match FileConfig::load(path) {
            Ok(config) => Ok(Some(config)),
            Err(e) => {
                eprintln!("error: {e}");
                Err(EXIT_USAGE)
            }
        },
    }
}

fn run_serve(args: ServeArgs) -> i32 {
    let file_config = match load_file_config(args.config.as_ref()) {
        Ok(config) => config,
        Err(code) => return code,
    };
    let policy = match resolve_policy(args.policy.as_deref(), file_config.as_ref()) {
        Ok(policy) => policy,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let config = ServerConfig {
        store_path: args.store,
        secret_path: args.secret,
        policy,
        max_age: resolve_max_age(args.max_age, file_config.as_ref()),
        max_real_delay: Duration::from_secs(args.max_real_delay),
    };
    match Server::bind(&args.bind, config) {
        Ok(server) => {
            println!("listening on {}", server.local_addr());
            server.run_forever();
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_TRANSPORT
        }
    }
}

fn read_password(flag: Option<String>) -> Option<String> {
    if let Some(password) = flag {
        return Some(password);
    }
    eprint!("password: ");
    let _ = std::io::stderr().flush();
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line).ok()?;
    Some(line.trim_end_matches(['\r', '\n']).to_string())
}

fn run_register(args: RegisterArgs) -> i32 {
    let Some(password) = read_password(args.password) else {
        eprintln!("error: could not read password");
        return EXIT_TRANSPORT;
    };
    match register_user(&args.store, &args.user, &password) {
        Ok(()) => {
            println!("registered {}", args.user);
            EXIT_OK
        }
        Err(
            e @ (StoreError::DuplicateUser(_)
            | StoreError::EmptyPassword
            | StoreError::MalformedUsername),
        ) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_TRANSPORT
        }
    }
}

fn format_delay(seconds: f64) -> String {
    if (seconds - seconds.round()).abs() < 1e-9 {
        format!("{}", seconds.round() as u64)
    } else {
        format!("{seconds:.3}")
    }
}

fn run_login(args: LoginArgs) -> i32 {
    let Some(password) = read_password(args.password) else {
        eprintln!("error: could not read password");
        return EXIT_TRANSPORT;
    };
    match client::login(&args.server, &args.user, &password) {
        Ok(verdict) if verdict.is_valid() => {
            println!("valid");
            EXIT_OK
        }
        Ok(verdict) => {
            println!(
                "invalid, next prompt in {}s",
                format_delay(verdict.next_delay)
            );
            EXIT_INVALID
        }
        Err(e @ ClientError::Throttled { .. }) => {
            println!("{e}");
            EXIT_INVALID
        }
        Err(e @ ClientError::EmptyPassword) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_TRANSPORT
        }
    }
}

fn write_log(path: Option<&PathBuf>, report: &AttackReport) -> i32 {
    if let Some(path) = path {
        if let Err(e) = std::fs::write(path, report.per_attempt_jsonl()) {
            eprintln!("error: cannot write log {}: {e}", path.display());
            return EXIT_TRANSPORT;
        }
    }
    EXIT_OK
}

fn print_report(report: &AttackReport) {
    println!("{}", AttackReport::csv_header());
    println!("{}", report.csv_row());
}

/// Self-contained attack environment: one account, chosen password, fresh
/// random secret.
fn attack_env(username: &str, password: &str) -> Option<(UserStore, ServerSecret)> {
    let mut store = UserStore::new();
    if let Err(e) = store.register(username, password) {
        eprintln!("error: {e}");
        return None;
    }
    match ServerSecret::generate() {
        Ok(secret) => Some((store, secret)),
        Err(e) => {
            eprintln!("error: {e}");
            None
        }
    }
}

fn synthetic_words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("candidate-{i:05}")).collect()
}

const ABSENT_PASSWORD: &str = "!not-in-any-wordlist!";

fn run_attack(args: AttackArgs) -> i32 {
    match args.kind {
        AttackKind::Dictionary {
            words,
            wordlist,
            target_index,
            username,
            policy,
            mode,
            seed,
            log,
        } => {
            let dictionary = match wordlist {
                Some(path) => match std::fs::read_to_string(&path) {
                    Ok(text) => text.lines().map(str::to_string).collect::<Vec<_>>(),
                    Err(e) => {
                        eprintln!("error: cannot read wordlist {}: {e}", path.display());
                        return EXIT_TRANSPORT;
                    }
                },
                None => synthetic_words(words),
            };
            if dictionary.is_empty() {
                eprintln!("error: dictionary is empty");
                return EXIT_USAGE;
            }
            let password = match target_index {
                Some(i) => match dictionary.get(i) {
                    Some(word) => word.clone(),
                    None => {
                        eprintln!(
                            "error: --target-index {i} is out of range for {} words",
                            dictionary.len()
                        );
                        return EXIT_USAGE;
                    }
                },
                None => ABSENT_PASSWORD.to_string(),
            };
            let policy = match resolve_policy(policy.as_deref(), None) {
                Ok(policy) => policy,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let Some((store, secret)) = attack_env(&username, &password) else {
                return EXIT_TRANSPORT;
            };
            let mut sim = Simulation::new(&store, policy, secret, seed);
            let mode = match mode {
                ModeArg::Carry => DictionaryMode::CarryCookie,
                ModeArg::Fresh => DictionaryMode::FreshSession,
            };
            match dictionary_attack(&mut sim, &dictionary, &username, mode) {
                Ok(report) => {
                    print_report(&report);
                    write_log(log.as_ref(), &report)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_TRANSPORT
                }
            }
        }
        AttackKind::Replay {
            sessions,
            policy,
            seed,
            log,
        } => {
            let policy = match resolve_policy(policy.as_deref(), None) {
                Ok(policy) => policy,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let Some((store, secret)) = attack_env("victim", "sw0rdf1sh-replay!") else {
                return EXIT_TRANSPORT;
            };
            let mut sim = Simulation::new(&store, policy, secret, seed);
            match replay_attack(&mut sim, "victim", "sw0rdf1sh-replay!", sessions) {
                Ok(report) => {
                    print_report(&report);
                    write_log(log.as_ref(), &report)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_TRANSPORT
                }
            }
        }
        AttackKind::Forge {
            trials,
            policy,
            seed,
            control,
            log,
        } => {
            let policy = match resolve_policy(policy.as_deref(), None) {
                Ok(policy) => policy,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let Some((store, secret)) = attack_env("victim", "sw0rdf1sh-forge!") else {
                return EXIT_TRANSPORT;
            };
            let mut sim = Simulation::new(&store, policy, secret, seed);
            // One honest session for the adversary to observe.
            let (_, transcript) = match sim.run_session("victim", "sw0rdf1sh-forge!") {
                Ok(result) => result,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_TRANSPORT;
                }
            };
            let views = vec![transcript.adversary_view()];
            let result = if control {
                let key = transcript
                    .messages
                    .iter()
                    .find(|m| m.channel == ChannelKind::Secure)
                    .and_then(|m| m.payload.get(16..32))
                    .and_then(|raw| raw.try_into().ok())
                    .map(SessionKey::from_bytes);
                let Some(key) = key else {
                    eprintln!("error: observed session has no secure-channel key");
                    return EXIT_TRANSPORT;
                };
                forge_attack_with_known_key(&mut sim, &views, "victim", trials, &key)
            } else {
                forge_attack(&mut sim, &views, "victim", trials)
            };
            match result {
                Ok(report) => {
                    print_report(&report);
                    write_log(log.as_ref(), &report)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_TRANSPORT
                }
            }
        }
    }
}

fn run_report(args: ReportArgs) -> i32 {
    let mut policies = Vec::new();
    for spec in args.policies.split(',') {
        match DelayPolicy::parse(spec.trim()) {
            Ok(policy) => policies.push(policy),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    if policies.len() < 2 {
        eprintln!("error: --policies needs at least 2 entries");
        return EXIT_USAGE;
    }
    let Some((store, secret)) = attack_env("victim", ABSENT_PASSWORD) else {
        return EXIT_TRANSPORT;
    };
    let dictionary = synthetic_words(args.words);
    match compare_policies(&store, &secret, &dictionary, "victim", &policies, args.seed) {
        Ok(rows) => {
            print!("{}", comparison_csv(&rows));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_TRANSPORT
        }
    }
}
