//! Adversary implementations and the metrics that quantify what throttling
//! buys: online dictionary guessing, cross-session proof replay, and proof
//! forgery from eavesdropped data.
//!
//! The forgery adversary is deliberately over-powered: it is granted the
//! account's stored password digest on top of everything that crossed the
//! insecure channel, leaving the session key as its only unknown. Even so,
//! each trial succeeds only by guessing the 16-octet key, so the measured
//! success rate isolates exactly what key secrecy contributes.

use crate::crypto::{random_key_with, session_proof, ServerSecret, SessionKey};
use crate::netsim::{ChannelMessage, Direction, SimError, Simulation};
use crate::protocol::{ChallengeCookie, Outcome, ProofResponse, COOKIE_LEN};
use crate::store::UserStore;
use crate::throttle::DelayPolicy;

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("dictionary must not be empty")]
    EmptyDictionary,
    #[error("trial count must be at least 1")]
    InvalidTrials,
    #[error("policy comparison needs at least 2 policies")]
    TooFewPolicies,
    #[error("no account named {0:?} to attack")]
    UnknownUser(String),
    #[error("observed traffic contains no challenge cookie to target")]
    NoObservedChallenge,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackerKind {
    Dictionary,
    Replay,
    Forge,
}

impl AttackerKind {
    fn as_str(&self) -> &'static str {
        match self {
            AttackerKind::Dictionary => "dictionary",
            AttackerKind::Replay => "replay",
            AttackerKind::Forge => "forge",
        }
    }
}

/// How the dictionary attacker handles the attempt counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DictionaryMode {
    /// Echo each verdict's counter into the next attempt and pay the
    /// prescribed wait: the behavior the protocol assumes.
    #[default]
    CarryCookie,
    /// Open a brand-new session per guess, resetting the counter to 1 and
    /// paying nothing. This documents the residual weakness of a verifier
    /// that keeps no state: nothing stops a guesser from starting over.
    FreshSession,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    pub guess_index: usize,
    pub verdict: Outcome,
    pub delay_charged: f64,
}

impl AttemptRecord {
    fn jsonl_line(&self) -> String {
        let verdict = match self.verdict {
            Outcome::Valid => "valid",
            Outcome::Invalid => "invalid",
        };
        format!(
            "{{\"guess_index\":{},\"verdict\":\"{}\",\"delay_charged\":{}}}",
            self.guess_index, verdict, self.delay_charged
        )
    }
}

/// Outcome of one attack campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub attacker_kind: AttackerKind,
    pub attempts_made: u64,
    pub successes: u64,
    pub sim_time_elapsed: u64,
    pub attempts_per_unit_time: f64,
    pub per_attempt_log: Vec<AttemptRecord>,
}

impl AttackReport {
    fn new(
        attacker_kind: AttackerKind,
        attempts_made: u64,
        successes: u64,
        sim_time_elapsed: u64,
        per_attempt_log: Vec<AttemptRecord>,
    ) -> Self {
        let attempts_per_unit_time = attempts_made as f64 / (sim_time_elapsed.max(1)) as f64;
        AttackReport {
            attacker_kind,
            attempts_made,
            successes,
            sim_time_elapsed,
            attempts_per_unit_time,
            per_attempt_log,
        }
    }

    pub fn csv_header() -> &'static str {
        "attacker_kind,attempts,successes,sim_time,rate"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.attacker_kind.as_str(),
            self.attempts_made,
            self.successes,
            self.sim_time_elapsed,
            self.attempts_per_unit_time
        )
    }

    /// Per-attempt log, one JSON object per line.
    pub fn per_attempt_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.per_attempt_log {
            out.push_str(&record.jsonl_line());
            out.push('\n');
        }
        out
    }
}

/// Submits dictionary words in order until one authenticates or the list
/// runs out. In [`DictionaryMode::CarryCookie`] the attacker pays each
/// verdict's prescribed wait on the simulated clock before the following
/// guess; nothing is paid after the final guess because no further prompt
/// is requested.
pub fn dictionary_attack<S: AsRef<str>>(
    sim: &mut Simulation<'_>,
    dictionary: &[S],
    username: &str,
    mode: DictionaryMode,
) -> Result<AttackReport, AttackError> {
    if dictionary.is_empty() {
        return Err(AttackError::EmptyDictionary);
    }
    let start = sim.clock().now();
    let mut pending_wait: u64 = 0;
    let mut n: u64 = 1;
    let mut attempts = 0;
    let mut successes = 0;
    let mut log = Vec::with_capacity(dictionary.len());

    for (i, guess) in dictionary.iter().enumerate() {
        if pending_wait > 0 {
            sim.clock_mut().advance(pending_wait);
        }
        let (verdict, _) = sim.run_attempt_no_wait(username, guess.as_ref(), n)?;
        attempts += 1;
        log.push(AttemptRecord {
            guess_index: i,
            verdict: verdict.outcome,
            delay_charged: pending_wait as f64,
        });
        if verdict.is_valid() {
            successes = 1;
            break;
        }
        match mode {
            DictionaryMode::CarryCookie => {
                pending_wait = verdict.next_delay.ceil() as u64;
                n = verdict.next_n;
            }
            DictionaryMode::FreshSession => {
                pending_wait = 0;
                n = 1;
            }
        }
    }
    let elapsed = sim.clock().now() - start;
    Ok(AttackReport::new(
        AttackerKind::Dictionary,
        attempts,
        successes,
        elapsed,
        log,
    ))
}

/// Records `sessions` honest logins and replays each captured proof message
/// into a fresh session. Every replay is expected to fail: the fresh
/// challenge carries a fresh key, so the captured proof digest is stale.
pub fn replay_attack(
    sim: &mut Simulation<'_>,
    username: &str,
    password: &str,
    sessions: u64,
) -> Result<AttackReport, AttackError> {
    if sessions < 1 {
        return Err(AttackError::InvalidTrials);
    }
    let start = sim.clock().now();
    let mut successes = 0;
    let mut log = Vec::with_capacity(sessions as usize);
    for s in 0..sessions {
        let (_, transcript) = sim.run_session(username, password)?;
        let seq = transcript
            .proof_message_seq()
            .expect("a completed session always contains a proof message");
        let verdict = sim.replay(&transcript, seq)?;
        if verdict.is_valid() {
            successes += 1;
        }
        log.push(AttemptRecord {
            guess_index: s as usize,
            verdict: verdict.outcome,
            delay_charged: verdict.next_delay.ceil(),
        });
    }
    let elapsed = sim.clock().now() - start;
    Ok(AttackReport::new(
        AttackerKind::Replay,
        sessions,
        successes,
        elapsed,
        log,
    ))
}

/// Forgery from eavesdropped traffic: take the most recent challenge cookie
/// visible on the insecure channel and submit proofs built from the
/// account digest plus a fresh random key guess per trial.
pub fn forge_attack(
    sim: &mut Simulation<'_>,
    views: &[Vec<ChannelMessage>],
    username: &str,
    trials: u64,
) -> Result<AttackReport, AttackError> {
    forge_with(sim, views, username, trials, None)
}

/// Control condition: the same construction with the session's true key.
/// Exactly this attacker must succeed, or the harness is not measuring key
/// secrecy at all.
pub fn forge_attack_with_known_key(
    sim: &mut Simulation<'_>,
    views: &[Vec<ChannelMessage>],
    username: &str,
    trials: u64,
    key: &SessionKey,
) -> Result<AttackReport, AttackError> {
    forge_with(sim, views, username, trials, Some(*key))
}

fn forge_with(
    sim: &mut Simulation<'_>,
    views: &[Vec<ChannelMessage>],
    username: &str,
    trials: u64,
    known_key: Option<SessionKey>,
) -> Result<AttackReport, AttackError> {
    if trials < 1 {
        return Err(AttackError::InvalidTrials);
    }
    let digest = *sim
        .store()
        .lookup(username)
        .ok_or_else(|| AttackError::UnknownUser(username.to_string()))?;
    let cookie = views
        .iter()
        .flatten()
        .rev()
        .find(|m| m.direction == Direction::ServerToClient && m.payload.len() == COOKIE_LEN)
        .and_then(|m| ChallengeCookie::decode(&m.payload).ok())
        .ok_or(AttackError::NoObservedChallenge)?;

    let now = sim.clock().now();
    let mut successes = 0;
    let mut log = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let key = known_key.unwrap_or_else(|| random_key_with(sim.rng_mut()));
        let proof = session_proof(&digest, &key);
        let resp = ProofResponse {
            cookie: cookie.clone(),
            proof,
        };
        let verdict = sim.verifier().check(&resp, now);
        if verdict.is_valid() {
            successes += 1;
        }
        log.push(AttemptRecord {
            guess_index: i as usize,
            verdict: verdict.outcome,
            delay_charged: 0.0,
        });
    }
    // Injected responses spend no simulated time; this measures
    // cryptographic success probability, not throttling.
    Ok(AttackReport::new(
        AttackerKind::Forge,
        trials,
        successes,
        0,
        log,
    ))
}

/// One row of the policy comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComparison {
    pub policy: String,
    pub sim_time_to_exhaust: u64,
    pub attempts_per_unit_time: f64,
}

pub fn comparison_csv(rows: &[PolicyComparison]) -> String {
    let mut out = String::from("policy,sim_time_to_exhaust,attempts_per_unit_time\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.policy, row.sim_time_to_exhaust, row.attempts_per_unit_time
        ));
    }
    out
}

/// Runs one carry-cookie dictionary attack per policy, each on a fresh
/// clock and an identically seeded simulator, and tabulates the cost.
pub fn compare_policies<S: AsRef<str>>(
    store: &UserStore,
    secret: &ServerSecret,
    dictionary: &[S],
    username: &str,
    policies: &[DelayPolicy],
    seed: u64,
) -> Result<Vec<PolicyComparison>, AttackError> {
    if policies.len() < 2 {
        return Err(AttackError::TooFewPolicies);
    }
    let mut rows = Vec::with_capacity(policies.len());
    for policy in policies {
        let mut sim = Simulation::new(store, policy.clone(), secret.clone(), seed);
        let report =
            dictionary_attack(&mut sim, dictionary, username, DictionaryMode::CarryCookie)?;
        rows.push(PolicyComparison {
            policy: policy.label(),
            sim_time_to_exhaust: report.sim_time_elapsed,
            attempts_per_unit_time: report.attempts_per_unit_time,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SessionKey;
    use crate::netsim::ChannelKind;
    use crate::throttle::cumulative_lockout;

    fn store() -> UserStore {
        let mut s = UserStore::new();
        s.register("victim", "sw0rdf1sh!").unwrap();
        s
    }

    fn sim(store: &UserStore) -> Simulation<'_> {
        Simulation::new(
            store,
            DelayPolicy::default(),
            ServerSecret::from_bytes([8; 32]),
            17,
        )
    }

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("guess-{i:04}")).collect()
    }

    #[test]
    fn hit_on_third_word_costs_twelve_time_units() {
        let store = store();
        let mut sim = sim(&store);
        let dict = vec!["alpha", "beta", "sw0rdf1sh!", "delta"];
        let report =
            dictionary_attack(&mut sim, &dict, "victim", DictionaryMode::CarryCookie).unwrap();
        assert_eq!(report.successes, 1);
        assert_eq!(report.attempts_made, 3);
        assert_eq!(report.sim_time_elapsed, 12);
        let charged: Vec<f64> = report
            .per_attempt_log
            .iter()
            .map(|r| r.delay_charged)
            .collect();
        assert_eq!(charged, vec![0.0, 4.0, 8.0]);
    }

    #[test]
    fn exhausting_ten_words_costs_2044_time_units() {
        let store = store();
        let mut sim = sim(&store);
        let report =
            dictionary_attack(&mut sim, &words(10), "victim", DictionaryMode::CarryCookie).unwrap();
        assert_eq!(report.successes, 0);
        assert_eq!(report.attempts_made, 10);
        assert_eq!(report.sim_time_elapsed, 2044);
    }

    #[test]
    fn single_word_hit_is_free() {
        let store = store();
        let mut sim = sim(&store);
        let report = dictionary_attack(
            &mut sim,
            &["sw0rdf1sh!"],
            "victim",
            DictionaryMode::CarryCookie,
        )
        .unwrap();
        assert_eq!(report.successes, 1);
        assert_eq!(report.sim_time_elapsed, 0);
        assert_eq!(report.attempts_per_unit_time, 1.0);
    }

    #[test]
    fn elapsed_time_matches_the_lockout_oracle_for_every_dictionary_size() {
        let store = store();
        let policy = DelayPolicy::default();
        for d in 2..=20u64 {
            let mut sim = sim(&store);
            let report = dictionary_attack(
                &mut sim,
                &words(d as usize),
                "victim",
                DictionaryMode::CarryCookie,
            )
            .unwrap();
            let oracle = cumulative_lockout(d, &policy).unwrap();
            assert_eq!(
                report.sim_time_elapsed as f64, oracle,
                "dictionary size {d}"
            );
        }
    }

    #[test]
    fn fresh_session_mode_pays_nothing_and_resets_the_counter() {
        let store = store();
        let mut sim = sim(&store);
        let report =
            dictionary_attack(&mut sim, &words(10), "victim", DictionaryMode::FreshSession)
                .unwrap();
        assert_eq!(report.successes, 0);
        assert_eq!(report.sim_time_elapsed, 0);
        assert!(report
            .per_attempt_log
            .iter()
            .all(|r| r.delay_charged == 0.0));
        // The documented residual weakness: unthrottled guess rate.
        assert_eq!(report.attempts_per_unit_time, 10.0);
    }

    #[test]
    fn honest_user_who_mistypes_twice_waits_twelve_units_total() {
        let store = store();
        let mut sim = sim(&store);
        let dict = vec!["typo-one", "typo-two", "sw0rdf1sh!"];
        let report =
            dictionary_attack(&mut sim, &dict, "victim", DictionaryMode::CarryCookie).unwrap();
        assert_eq!(report.successes, 1);
        assert_eq!(report.sim_time_elapsed, 12);
    }

    #[test]
    fn empty_dictionary_is_rejected() {
        let store = store();
        let mut sim = sim(&store);
        let empty: Vec<String> = vec![];
        assert!(matches!(
            dictionary_attack(&mut sim, &empty, "victim", DictionaryMode::CarryCookie),
            Err(AttackError::EmptyDictionary)
        ));
    }

    #[test]
    fn throttling_dominance_grows_with_dictionary_size() {
        let store = store();
        let secret = ServerSecret::from_bytes([8; 32]);
        let mut previous_ratio = 0.0;
        for d in 2..=20usize {
            let policies = [DelayPolicy::unthrottled(), DelayPolicy::default()];
            let rows =
                compare_policies(&store, &secret, &words(d), "victim", &policies, 17).unwrap();
            assert_eq!(rows[0].sim_time_to_exhaust, 0);
            assert!(rows[1].sim_time_to_exhaust > 0);
            let ratio = rows[0].attempts_per_unit_time / rows[1].attempts_per_unit_time;
            assert!(
                ratio > previous_ratio,
                "ratio stalled at dictionary size {d}"
            );
            previous_ratio = ratio;
        }
    }

    #[test]
    fn steeper_bases_cost_strictly_more() {
        let store = store();
        let secret = ServerSecret::from_bytes([8; 32]);
        let policies = [
            DelayPolicy::exponential(2.0).unwrap(),
            DelayPolicy::exponential(4.0).unwrap(),
        ];
        for d in 2..=12usize {
            let rows =
                compare_policies(&store, &secret, &words(d), "victim", &policies, 17).unwrap();
            assert!(rows[1].sim_time_to_exhaust > rows[0].sim_time_to_exhaust);
        }
    }

    #[test]
    fn comparison_requires_at_least_two_policies() {
        let store = store();
        let secret = ServerSecret::from_bytes([8; 32]);
        let policies = [DelayPolicy::default()];
        assert!(matches!(
            compare_policies(&store, &secret, &words(3), "victim", &policies, 17),
            Err(AttackError::TooFewPolicies)
        ));
    }

    #[test]
    fn forgery_with_random_keys_never_succeeds() {
        let store = store();
        let mut sim = sim(&store);
        let (_, transcript) = sim.run_session("victim", "sw0rdf1sh!").unwrap();
        let views = vec![transcript.adversary_view()];
        let report = forge_attack(&mut sim, &views, "victim", 2000).unwrap();
        assert_eq!(report.successes, 0);
        assert_eq!(report.attempts_made, 2000);
        assert_eq!(report.sim_time_elapsed, 0);
    }

    #[test]
    fn forgery_with_the_true_key_succeeds() {
        let store = store();
        let mut sim = sim(&store);
        let (_, transcript) = sim.run_session("victim", "sw0rdf1sh!").unwrap();
        // The control attacker is handed the key from the secure channel,
        // which a real eavesdropper never sees.
        let secure = transcript
            .messages
            .iter()
            .find(|m| m.channel == ChannelKind::Secure)
            .unwrap();
        let key = SessionKey::from_bytes(secure.payload[16..32].try_into().unwrap());
        let views = vec![transcript.adversary_view()];
        let report = forge_attack_with_known_key(&mut sim, &views, "victim", 1, &key).unwrap();
        assert_eq!(report.successes, 1);
    }

    #[test]
    fn forge_preconditions() {
        let store = store();
        let mut sim = sim(&store);
        let (_, transcript) = sim.run_session("victim", "sw0rdf1sh!").unwrap();
        let views = vec![transcript.adversary_view()];
        assert!(matches!(
            forge_attack(&mut sim, &views, "victim", 0),
            Err(AttackError::InvalidTrials)
        ));
        assert!(matches!(
            forge_attack(&mut sim, &views, "nobody", 10),
            Err(AttackError::UnknownUser(_))
        ));
        let no_views: Vec<Vec<ChannelMessage>> = vec![];
        assert!(matches!(
            forge_attack(&mut sim, &no_views, "victim", 10),
            Err(AttackError::NoObservedChallenge)
        ));
    }

    #[test]
    fn replay_campaign_never_succeeds() {
        let store = store();
        let mut sim = sim(&store);
        let report = replay_attack(&mut sim, "victim", "sw0rdf1sh!", 20).unwrap();
        assert_eq!(report.attempts_made, 20);
        assert_eq!(report.successes, 0);
    }

    #[test]
    fn report_rate_uses_a_floor_of_one_time_unit() {
        let store = store();
        let mut sim = sim(&store);
        let report =
            dictionary_attack(&mut sim, &words(5), "victim", DictionaryMode::FreshSession).unwrap();
        assert_eq!(report.sim_time_elapsed, 0);
        assert_eq!(report.attempts_per_unit_time, 5.0);
    }

    #[test]
    fn csv_and_jsonl_shapes() {
        let store = store();
        let mut sim = sim(&store);
        let report = dictionary_attack(
            &mut sim,
            &["alpha", "sw0rdf1sh!"],
            "victim",
            DictionaryMode::CarryCookie,
        )
        .unwrap();
        assert_eq!(
            AttackReport::csv_header(),
            "attacker_kind,attempts,successes,sim_time,rate"
        );
        let row = report.csv_row();
        assert!(
            row.starts_with("dictionary,2,1,4,"),
            "unexpected row {row:?}"
        );

        let jsonl = report.per_attempt_jsonl();
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), 2);
        for line in lines {
            let value: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(value.get("guess_index").is_some());
            assert!(value.get("verdict").is_some());
            assert!(value.get("delay_charged").is_some());
        }

        let table = comparison_csv(&[PolicyComparison {
            policy: "none".into(),
            sim_time_to_exhaust: 0,
            attempts_per_unit_time: 10.0,
        }]);
        assert!(table.starts_with("policy,sim_time_to_exhaust,attempts_per_unit_time\n"));
        assert!(table.contains("none,0,10"));
    }
}
