use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendError, ChatRequest, ChatResponse};
use super::cache::{cache_key, AnnotationCache};
use super::cost::{estimate_tokens, CostModel};
use super::parse::{parse_response, ParsedAnnotation};
use super::{AnnotateError, ChatParams};
use crate::corpus::{Label, Provenance, Publication};
use crate::promptkit::{build_user_message, PromptSet, PromptSpec, DEFAULT_USER_BUDGET};

/// Prefix of `parse_error` for calls that never produced a response.
pub const TRANSPORT_ERROR_PREFIX: &str = "transport_error";
/// Prefix of `parse_error` for publications that could not be rendered.
pub const INVALID_INPUT_PREFIX: &str = "invalid_input";

/// One annotated publication. Exactly one of `parsed` and `parse_error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub publication_id: String,
    pub prompt_id: String,
    pub params: ChatParams,
    pub raw_response: String,
    pub parsed: Option<ParsedAnnotation>,
    pub parse_error: Option<String>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_units: f64,
    pub timestamp: String,
    #[serde(default)]
    pub retries: u32,
}

impl AnnotationRecord {
    pub fn is_transport_error(&self) -> bool {
        self.parse_error
            .as_deref()
            .is_some_and(|e| e.starts_with(TRANSPORT_ERROR_PREFIX))
    }

    pub fn is_malformed(&self) -> bool {
        self.parsed.is_none() && !self.is_transport_error()
    }

    /// Chatbot label with the parsed probability as confidence.
    pub fn label(&self) -> Option<Label> {
        let p = self.parsed?;
        Label::new(p.label, Provenance::Chatbot, Some(p.probability)).ok()
    }
}

/// Capped exponential backoff: `base * 2^attempt`, at most `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX));
        hint.unwrap_or(exp).min(self.max_delay)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

#[derive(Clone)]
pub struct AnnotateOptions {
    /// Requests in flight at once.
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub requests_per_minute: Option<u32>,
    /// Ask once more when a reply does not parse.
    pub reask_malformed: bool,
    pub cache: Option<AnnotationCache>,
    pub cost_model: CostModel,
    pub user_budget: usize,
    /// Injected so tests do not wait on backoff.
    pub sleeper: Sleeper,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            retry: RetryPolicy::default(),
            requests_per_minute: None,
            reask_malformed: false,
            cache: None,
            cost_model: CostModel::default(),
            user_budget: DEFAULT_USER_BUDGET,
            sleeper: Arc::new(std::thread::sleep),
        }
    }
}

impl std::fmt::Debug for AnnotateOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnnotateOptions")
            .field("concurrency", &self.concurrency)
            .field("retry", &self.retry)
            .field("requests_per_minute", &self.requests_per_minute)
            .field("reask_malformed", &self.reask_malformed)
            .field("cache", &self.cache)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub total: u64,
    pub cached: u64,
    pub backend_calls: u64,
    pub retries: u64,
    pub parsed: u64,
    pub malformed: u64,
    pub transport_errors: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// In input order.
    pub records: Vec<AnnotationRecord>,
    pub stats: BatchStats,
    /// Cost of records produced by backend calls in this run.
    pub incurred_cost: f64,
}

#[derive(Default)]
struct Counters {
    cached: AtomicU64,
    backend_calls: AtomicU64,
    retries: AtomicU64,
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(per_minute: u32) -> Self {
        Self {
            interval: Duration::from_secs(60) / per_minute.max(1),
            next: Mutex::new(None),
        }
    }

    fn wait(&self, sleep: &Sleeper) {
        let pause = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !pause.is_zero() {
            sleep(pause);
        }
    }
}

struct Job<'a> {
    prompts_checksum: &'a str,
    system: &'a str,
    spec: PromptSpec,
    params: &'a ChatParams,
    backend: &'a dyn Backend,
    opts: &'a AnnotateOptions,
    limiter: Option<RateLimiter>,
    counters: Counters,
    abort: AtomicBool,
    auth_error: Mutex<Option<String>>,
}

// nearly every outcome is a record, so boxing would only add allocations
#[allow(clippy::large_enum_variant)]
enum Outcome {
    Record { record: AnnotationRecord, fresh: bool },
    Aborted,
}

impl Job<'_> {
    fn call(&self, request: &ChatRequest) -> (Result<ChatResponse, BackendError>, u32) {
        let mut retries = 0;
        loop {
            if let Some(l) = &self.limiter {
                l.wait(&self.opts.sleeper);
            }
            self.counters.backend_calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.complete(request) {
                Err(e) if e.is_retryable() && retries < self.opts.retry.max_retries => {
                    let hint = match &e {
                        BackendError::RateLimited { retry_after } => *retry_after,
                        _ => None,
                    };
                    let delay = self.opts.retry.delay(retries, hint);
                    retries += 1;
                    self.counters.retries.fetch_add(1, Ordering::SeqCst);
                    log::warn!(
                        "{}: {e}; retry {retries}/{} in {delay:?}",
                        request.publication_id,
                        self.opts.retry.max_retries
                    );
                    (self.opts.sleeper)(delay);
                }
                other => return (other, retries),
            }
        }
    }

    fn record(&self, publication: &Publication) -> Result<Outcome, AnnotateError> {
        let prompt_id = self.spec.id();
        let key = cache_key(&publication.id, &prompt_id, self.prompts_checksum, self.params);
        if let Some(hit) = self.opts.cache.as_ref().and_then(|c| c.get(&key)) {
            self.counters.cached.fetch_add(1, Ordering::SeqCst);
            return Ok(Outcome::Record {
                record: hit,
                fresh: false,
            });
        }
        let mut record = AnnotationRecord {
            publication_id: publication.id.clone(),
            prompt_id,
            params: self.params.clone(),
            raw_response: String::new(),
            parsed: None,
            parse_error: None,
            input_tokens: 0,
            output_tokens: 0,
            cost_units: 0.0,
            timestamp: super::backend::OFFLINE_TIMESTAMP.to_string(),
            retries: 0,
        };
        let user = match build_user_message(publication, self.opts.user_budget) {
            Ok(u) => u.text,
            Err(e) => {
                record.parse_error = Some(format!("{INVALID_INPUT_PREFIX}: {e}"));
                return Ok(Outcome::Record { record, fresh: true });
            }
        };
        let request = ChatRequest {
            publication_id: publication.id.clone(),
            prompt_id: record.prompt_id.clone(),
            params: self.params.clone(),
            system: self.system.to_string(),
            user,
        };

        let mut asks = 0;
        let response = loop {
            let (result, retries) = self.call(&request);
            record.retries += retries;
            asks += 1;
            let response = match result {
                Ok(r) => r,
                Err(BackendError::Auth(msg)) => {
                    self.abort.store(true, Ordering::SeqCst);
                    self.auth_error.lock().expect("auth lock").get_or_insert(msg);
                    return Ok(Outcome::Aborted);
                }
                Err(e) => {
                    record.parse_error = Some(format!("{TRANSPORT_ERROR_PREFIX}: {e}"));
                    return Ok(Outcome::Record { record, fresh: true });
                }
            };
            let malformed = parse_response(&response.content).is_err();
            if malformed && self.opts.reask_malformed && asks < 2 {
                log::info!("{}: malformed reply, asking again", publication.id);
                continue;
            }
            break response;
        };

        match parse_response(&response.content) {
            Ok(p) => record.parsed = Some(p),
            Err(e) => record.parse_error = Some(e.to_string()),
        }
        let usage = response.usage.unwrap_or(super::backend::Usage {
            input_tokens: estimate_tokens(&request.system) + estimate_tokens(&request.user),
            output_tokens: estimate_tokens(&response.content),
        });
        record.input_tokens = usage.input_tokens;
        record.output_tokens = usage.output_tokens;
        record.cost_units = self
            .opts
            .cost_model
            .cost(&self.params.model, usage.input_tokens, usage.output_tokens)?;
        record.raw_response = response.content;
        if let Some(ts) = response.timestamp {
            record.timestamp = ts;
        }
        if let Some(cache) = &self.opts.cache {
            cache.put(&key, &record)?;
        }
        Ok(Outcome::Record { record, fresh: true })
    }
}

/// Annotates every publication with one prompt.
///
/// Cache hits skip the backend. New parsed or malformed records are written
/// to the cache as soon as they complete, so an interrupted run resumes
/// where it stopped; transport failures are returned but not cached.
/// An authentication failure stops the batch and is returned as an error.
pub fn annotate_batch(
    pubs: &[Publication],
    prompts: &PromptSet,
    spec: PromptSpec,
    params: &ChatParams,
    backend: &dyn Backend,
    opts: &AnnotateOptions,
) -> Result<BatchOutcome, AnnotateError> {
    params.validate()?;
    opts.cost_model.validate()?;
    opts.cost_model.rate(&params.model)?;
    let rendered = prompts.render(spec)?;
    let job = Job {
        prompts_checksum: prompts.checksum(),
        system: &rendered.system_text,
        spec,
        params,
        backend,
        opts,
        limiter: opts.requests_per_minute.map(RateLimiter::new),
        counters: Counters::default(),
        abort: AtomicBool::new(false),
        auth_error: Mutex::new(None),
    };

    let slots: Vec<Mutex<Option<(AnnotationRecord, bool)>>> = pubs.iter().map(|_| Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let failure: Mutex<Option<AnnotateError>> = Mutex::new(None);
    let workers = opts.concurrency.max(1).min(pubs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if job.abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= pubs.len() {
                    break;
                }
                match job.record(&pubs[i]) {
                    Ok(Outcome::Record { record, fresh }) => {
                        *slots[i].lock().expect("slot lock") = Some((record, fresh));
                    }
                    Ok(Outcome::Aborted) => break,
                    Err(e) => {
                        job.abort.store(true, Ordering::SeqCst);
                        failure.lock().expect("failure lock").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });

    if let Some(msg) = job.auth_error.into_inner().expect("auth lock") {
        return Err(AnnotateError::Auth(msg));
    }
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }

    let mut stats = BatchStats {
        total: pubs.len() as u64,
        cached: job.counters.cached.load(Ordering::SeqCst),
        backend_calls: job.counters.backend_calls.load(Ordering::SeqCst),
        retries: job.counters.retries.load(Ordering::SeqCst),
        ..Default::default()
    };
    let mut incurred_cost = 0.0;
    let mut records = Vec::with_capacity(pubs.len());
    for slot in slots {
        let (record, fresh) = slot.into_inner().expect("slot lock").expect("every slot filled");
        if record.parsed.is_some() {
            stats.parsed += 1;
        } else if record.is_transport_error() {
            stats.transport_errors += 1;
        } else {
            stats.malformed += 1;
        }
        if fresh {
            incurred_cost += record.cost_units;
        }
        records.push(record);
    }
    Ok(BatchOutcome {
        records,
        stats,
        incurred_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotator::backend::{MockBackend, MockReply, MockScript};
    use crate::corpus::{LabelValue, Source};
    use crate::promptkit::{Clause, Persona};
    use std::collections::BTreeMap;

    fn pubs(n: usize) -> Vec<Publication> {
        (0..n)
            .map(|i| {
                Publication::new(
                    format!("p{i:03}"),
                    Source::Arxiv,
                    format!("Paper {i}"),
                    "Abstract.",
                    2021,
                )
            })
            .collect()
    }

    fn spec() -> PromptSpec {
        PromptSpec::new(Persona::Expert, Clause::UncertaintyClarity)
    }

    fn opts(cache: Option<AnnotationCache>) -> AnnotateOptions {
        AnnotateOptions {
            cache,
            sleeper: Arc::new(|_| {}),
            ..Default::default()
        }
    }

    fn run(p: &[Publication], backend: &dyn Backend, o: &AnnotateOptions) -> BatchOutcome {
        annotate_batch(p, &PromptSet::builtin(), spec(), &ChatParams::default(), backend, o).unwrap()
    }

    #[test]
    fn cache_hits_skip_backend() {
        let dir = tempfile::tempdir().unwrap();
        let o = opts(Some(AnnotationCache::open(dir.path()).unwrap()));
        let all = pubs(100);
        let warm = MockBackend::constant("AI, 0.9");
        run(&all[..40], &warm, &o);
        let backend = MockBackend::constant("AI, 0.9");
        let out = run(&all, &backend, &o);
        assert_eq!(backend.calls(), 60);
        assert_eq!((out.stats.cached, out.stats.backend_calls), (40, 60));
        assert_eq!(out.records.len(), 100);

        let again = MockBackend::constant("Non-AI, 0.1");
        let rerun = run(&all, &again, &o);
        assert_eq!(again.calls(), 0);
        assert_eq!(rerun.records, out.records);
        assert_eq!(rerun.incurred_cost, 0.0);
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let mut replies = BTreeMap::new();
        replies.insert(
            "p000".to_string(),
            vec![
                MockReply::Status { status: 500 },
                MockReply::Status { status: 500 },
                MockReply::Status { status: 500 },
                MockReply::content("Non-AI, 0.2"),
            ],
        );
        let backend = MockBackend::new(MockScript { default: None, replies });
        let slept = Arc::new(Mutex::new(Vec::new()));
        let log = slept.clone();
        let o = AnnotateOptions {
            sleeper: Arc::new(move |d| log.lock().unwrap().push(d)),
            ..Default::default()
        };
        let out = run(&pubs(1), &backend, &o);
        let r = &out.records[0];
        assert_eq!(r.parsed.unwrap().label, LabelValue::NonAi);
        assert_eq!(r.retries, 3);
        assert_eq!(out.stats.retries, 3);
        assert_eq!(backend.calls(), 4);
        assert_eq!(
            *slept.lock().unwrap(),
            vec![Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(4)]
        );
    }

    #[test]
    fn exhausted_retries_become_transport_records_and_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cache = AnnotationCache::open(dir.path()).unwrap();
        let backend = MockBackend::new(MockScript {
            default: Some(MockReply::Status { status: 503 }),
            replies: BTreeMap::new(),
        });
        let out = run(&pubs(2), &backend, &opts(Some(cache.clone())));
        assert_eq!(out.stats.transport_errors, 2);
        assert!(out.records.iter().all(|r| r.is_transport_error() && r.parsed.is_none()));
        assert_eq!(backend.calls(), 12);
        assert!(cache.is_empty());
    }

    #[test]
    fn auth_failure_aborts() {
        let backend = MockBackend::new(MockScript {
            default: Some(MockReply::Status { status: 401 }),
            replies: BTreeMap::new(),
        });
        let err = annotate_batch(
            &pubs(5),
            &PromptSet::builtin(),
            spec(),
            &ChatParams::default(),
            &backend,
            &opts(None),
        )
        .unwrap_err();
        assert!(matches!(err, AnnotateError::Auth(_)), "{err}");
        assert!(err.to_string().contains("ANNOBENCH_API_KEY"));
    }

    #[test]
    fn malformed_recorded_and_run_continues() {
        let mut replies = BTreeMap::new();
        replies.insert(
            "p001".to_string(),
            vec![MockReply::content("I cannot say."), MockReply::content("AI, 0.6")],
        );
        let script = MockScript {
            default: Some(MockReply::content("AI, 0.9")),
            replies,
        };
        let out = run(&pubs(3), &MockBackend::new(script.clone()), &opts(None));
        assert_eq!((out.stats.parsed, out.stats.malformed), (2, 1));
        assert_eq!(out.records[1].parse_error.as_deref(), Some("missing_label"));

        let reask = AnnotateOptions {
            reask_malformed: true,
            ..opts(None)
        };
        let out = run(&pubs(3), &MockBackend::new(script), &reask);
        assert_eq!(out.records[1].parsed.unwrap().probability, 0.6);
    }

    #[test]
    fn output_follows_input_order_under_concurrency() {
        let p = pubs(50);
        let o = AnnotateOptions {
            concurrency: 8,
            ..opts(None)
        };
        let out = run(&p, &MockBackend::constant("AI, 0.5"), &o);
        let ids: Vec<_> = out.records.iter().map(|r| r.publication_id.as_str()).collect();
        let expect: Vec<_> = p.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, expect);
    }

    #[test]
    fn backoff_is_capped() {
        let r = RetryPolicy::default();
        assert_eq!(r.delay(0, None), Duration::from_secs(1));
        assert_eq!(r.delay(10, None), Duration::from_secs(60));
        assert_eq!(r.delay(40, None), Duration::from_secs(60));
        assert_eq!(r.delay(0, Some(Duration::from_secs(7))), Duration::from_secs(7));
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let slept = Arc::new(Mutex::new(Duration::ZERO));
        let total = slept.clone();
        let o = AnnotateOptions {
            requests_per_minute: Some(600),
            concurrency: 1,
            sleeper: Arc::new(move |d| *total.lock().unwrap() += d),
            ..Default::default()
        };
        run(&pubs(4), &MockBackend::constant("AI, 0.5"), &o);
        // The sleeper does not sleep, so slots queue up: 100 + 200 + 300 ms.
        let waited = *slept.lock().unwrap();
        assert!(
            waited > Duration::from_millis(500) && waited <= Duration::from_millis(600),
            "{waited:?}"
        );
    }
}
