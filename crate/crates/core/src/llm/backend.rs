use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{render_assignment, PromptBundle, PRIOR_ASSIGNMENT, SINR_HEADER};
use super::LlmError;
use crate::ua::{self, RateTable};

/// A chat model that answers one prompt with free text.
pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &PromptBundle) -> Result<String, LlmError>;
}

/// Offline deterministic surrogate. Round one answers with the per-user
/// argmax-SINR association (empty BSs repaired); reflection rounds apply
/// best improving single-user moves to the embedded prior until none is
/// left, then the best improving exchange of two users, then a greedy
/// re-split over every load vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    inner.split(',').map(|t| t.trim().parse().ok()).collect()
}

fn total(a: &[usize], t: &RateTable) -> f64 {
    let mut load = vec![0usize; t.k()];
    let mut acc = vec![0.0; t.k()];
    for (i, &b) in a.iter().enumerate() {
        load[b] += 1;
        acc[b] += (1.0 + t.gamma[b][i]).log2();
    }
    load.iter().zip(&acc).filter(|(l, _)| **l > 0).map(|(l, s)| s / *l as f64).sum()
}

/// Every split of `n` users into `k` non-empty loads.
fn load_vectors(k: usize, n: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return if n >= 1 { vec![vec![n]] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=n.saturating_sub(k - 1) {
        for mut rest in load_vectors(k - 1, n - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// For each load split, fill BS slots greedily by per-slot rate
/// `log₂(1+γ)/n_k`, polish with single-user moves, and keep the best
/// association if it beats `a`.
fn rebalance(a: &[usize], t: &RateTable) -> Option<Vec<usize>> {
    let (k, n) = (t.k(), t.n());
    if k * n > 64 || n < k {
        return None;
    }
    let mut best = (a.to_vec(), total(a, t));
    for loads in load_vectors(k, n) {
        let mut pairs: Vec<(f64, usize, usize)> = (0..k)
            .flat_map(|b| (0..n).map(move |i| (b, i)))
            .map(|(b, i)| ((1.0 + t.gamma[b][i]).log2() / loads[b] as f64, b, i))
            .collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut cap = loads.clone();
        let mut cand = vec![usize::MAX; n];
        for (_, b, i) in pairs {
            if cand[i] == usize::MAX && cap[b] > 0 {
                cand[i] = b;
                cap[b] -= 1;
            }
        }
        while let Some((i, to, _)) = ua::best_transfer(&cand, t) {
            cand[i] = to;
        }
        let v = total(&cand, t);
        if v > best.1 + 1e-12 * best.1.abs() {
            best = (cand, v);
        }
    }
    (best.0 != a).then_some(best.0)
}

impl StubBackend {
    fn table_from_prompt(p: &PromptBundle) -> Option<RateTable> {
        let body = p.problem_description.split(SINR_HEADER).nth(1)?;
        let rows: Vec<Vec<f64>> = body
            .lines()
            .filter_map(|l| l.trim().strip_prefix("BS ").and_then(|r| r.split_once(':')))
            .map(|(_, vals)| parse_list(vals))
            .collect::<Option<_>>()?;
        RateTable::new(rows).ok()
    }

    fn prior_from_prompt(p: &PromptBundle) -> Option<Vec<usize>> {
        let se = p.self_enhancement.as_ref()?;
        let line = se.lines().find_map(|l| l.strip_prefix(PRIOR_ASSIGNMENT))?;
        parse_list(line)
    }

    pub fn answer(p: &PromptBundle) -> String {
        let Some(t) = Self::table_from_prompt(p) else {
            return "I could not read the SINR matrix.".into();
        };
        let (k, n) = (t.k(), t.n());
        let prior = Self::prior_from_prompt(p)
            .filter(|a| a.len() == n && a.iter().all(|&b| (1..=k).contains(&b)))
            .map(|a| a.iter().map(|b| b - 1).collect::<Vec<usize>>());
        let (assign, note) = match prior {
            Some(mut a) => {
                let mut moves = 0;
                while let Some((i, to, _)) = ua::best_transfer(&a, &t) {
                    a[i] = to;
                    moves += 1;
                }
                if moves > 0 {
                    (a, format!("{moves} single-user moves raise the total rate."))
                } else if let Some((i, j, _)) = ua::best_swap(&a, &t) {
                    a.swap(i, j);
                    (a, format!("Exchanging the base stations of users {} and {} raises the total rate.", i + 1, j + 1))
                } else if let Some(b) = rebalance(&a, &t) {
                    (
                        b,
                        "Re-splitting the users across base stations with different loads raises the total rate."
                            .to_string(),
                    )
                } else {
                    (a, "No single-user move, exchange or load change improves the previous association.".to_string())
                }
            }
            None => {
                let mut a: Vec<usize> = (0..n)
                    .map(|i| {
                        (0..k).max_by(|&x, &y| t.gamma[x][i].total_cmp(&t.gamma[y][i]).then(y.cmp(&x))).expect("k ≥ 1")
                    })
                    .collect();
                if n >= k {
                    ua::repair_empty(&mut a, &t);
                }
                (a, "Each user joins its strongest base station; empty base stations were filled.".to_string())
            }
        };
        let one_based: Vec<usize> = assign.iter().map(|b| b + 1).collect();
        format!("{note}\nASSIGNMENT: {}", render_assignment(&one_based))
    }
}

impl ChatBackend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, LlmError> {
        Ok(Self::answer(prompt))
    }
}

/// Replays fixed replies in order, repeating the last one.
#[derive(Debug)]
pub struct ScriptedBackend {
    replies: Vec<Result<String, LlmError>>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(replies: Vec<Result<String, LlmError>>) -> Self {
        assert!(!replies.is_empty(), "scripted backend needs at least one reply");
        ScriptedBackend { replies, cursor: Mutex::new(0) }
    }

    pub fn calls(&self) -> usize {
        *self.cursor.lock().expect("cursor lock")
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, _prompt: &PromptBundle) -> Result<String, LlmError> {
        let mut c = self.cursor.lock().expect("cursor lock");
        let r = self.replies[(*c).min(self.replies.len() - 1)].clone();
        *c += 1;
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmBackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_s: f64,
    pub max_retries: usize,
    pub max_in_flight: usize,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        LlmBackendConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env: "ISAC_LLM_API_KEY".into(),
            temperature: 1.0,
            timeout_s: 120.0,
            max_retries: 3,
            max_in_flight: 4,
        }
    }
}

impl LlmBackendConfig {
    /// Reads `ISAC_LLM_ENDPOINT`, `ISAC_LLM_MODEL`, `ISAC_LLM_KEY_ENV` and
    /// `ISAC_LLM_TEMPERATURE` over the defaults.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Ok(v) = std::env::var("ISAC_LLM_ENDPOINT") {
            c.endpoint_url = v;
        }
        if let Ok(v) = std::env::var("ISAC_LLM_MODEL") {
            c.model_name = v;
        }
        if let Ok(v) = std::env::var("ISAC_LLM_KEY_ENV") {
            c.api_key_env = v;
        }
        if let Some(v) = std::env::var("ISAC_LLM_TEMPERATURE").ok().and_then(|v| v.parse().ok()) {
            c.temperature = v;
        }
        c
    }
}

/// Counting gate on concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut f = self.free.lock().expect("gate lock");
        while *f == 0 {
            f = self.cv.wait(f).expect("gate wait");
        }
        *f -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking client for chat-completions style endpoints.
#[derive(Debug)]
pub struct HttpBackend {
    cfg: LlmBackendConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(cfg: LlmBackendConfig) -> Result<Self, LlmError> {
        if !(cfg.timeout_s > 0.0) {
            return Err(LlmError::Transport("timeout must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { free: Mutex::new(cfg.max_in_flight.max(1)), cv: Condvar::new() };
        Ok(HttpBackend { cfg, agent, gate })
    }

    pub fn request_body(&self, prompt: &PromptBundle) -> Value {
        json!({
            "model": self.cfg.model_name,
            "messages": [{ "role": "user", "content": prompt.render() }],
            "temperature": self.cfg.temperature,
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, (bool, String)> {
        let mut req = self.agent.post(&self.cfg.endpoint_url).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.cfg.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| (true, e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err((true, format!("HTTP {status}: {text}")));
        }
        if status >= 400 {
            return Err((false, format!("HTTP {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| (false, format!("response is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| (false, "response lacks choices[0].message.content".to_string()))
    }
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.cfg.model_name
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, LlmError> {
        let body = self.request_body(prompt);
        let _slot = self.gate.acquire();
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retryable, msg)) => {
                    last = msg;
                    if !retryable {
                        break;
                    }
                    if attempt < self.cfg.max_retries {
                        std::thread::sleep(Duration::from_millis(200 << attempt.min(6)));
                    }
                }
            }
        }
        Err(LlmError::Transport(last))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{build_prompt, parse_response};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn stub_identity_on_dominant_diagonal() {
        let t = RateTable::new(vec![vec![9.0, 1.0, 1.0], vec![1.0, 9.0, 1.0], vec![1.0, 1.0, 9.0]]).unwrap();
        let p = build_prompt(&t, 3, 3, 1.0, None).unwrap();
        assert_eq!(parse_response(&StubBackend::answer(&p), 3, 3).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn stub_reemits_local_optimum() {
        let t = RateTable::new(vec![vec![9.0, 1.0, 1.0], vec![1.0, 9.0, 9.0]]).unwrap();
        let p = build_prompt(&t, 2, 3, 1.0, Some((&[1, 2, 2], 1.0))).unwrap();
        assert_eq!(parse_response(&StubBackend::answer(&p), 2, 3).unwrap(), vec![1, 2, 2]);
    }

    #[test]
    fn stub_reflection_matches_coalition_refinement() {
        let t = RateTable::new(vec![vec![3.0, 3.0, 3.0], vec![7.0, 0.1, 0.1]]).unwrap();
        let prior = [1usize, 1, 2];
        let p = build_prompt(&t, 2, 3, 1.0, Some((&prior, 0.0))).unwrap();
        let got = parse_response(&StubBackend::answer(&p), 2, 3).unwrap();
        let u0 = crate::metrics::UAMatrix::from_one_based(2, &prior).unwrap();
        let want = ua::coalition_refine(&u0, &t).unwrap().one_based();
        assert_eq!(got, want);
    }

    #[test]
    fn stub_swaps_at_transfer_optimum() {
        // Transfers are blocked by the non-empty rule; the exchange is not.
        let t = RateTable::new(vec![vec![1.0, 50.0], vec![50.0, 1.0]]).unwrap();
        let p = build_prompt(&t, 2, 2, 1.0, Some((&[1, 2], 1.0))).unwrap();
        assert_eq!(parse_response(&StubBackend::answer(&p), 2, 2).unwrap(), vec![2, 1]);
    }

    /// One-shot HTTP server returning `reply` and handing back the request body.
    fn serve_once(status: &'static str, reply: String) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            let mut line = String::new();
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let resp = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
            String::from_utf8(body).unwrap()
        });
        (url, h)
    }

    #[test]
    fn http_backend_roundtrip() {
        let reply =
            json!({"choices": [{"message": {"role": "assistant", "content": "ok\nASSIGNMENT: [2, 1]"}}]}).to_string();
        let (url, server) = serve_once("200 OK", reply);
        let backend = HttpBackend::new(LlmBackendConfig {
            endpoint_url: url,
            model_name: "test-model".into(),
            api_key_env: "ISAC_TEST_KEY_UNSET".into(),
            temperature: 0.2,
            timeout_s: 10.0,
            max_retries: 0,
            max_in_flight: 1,
        })
        .unwrap();
        let t = RateTable::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = build_prompt(&t, 2, 2, 1.0, None).unwrap();
        let text = backend.complete(&p).unwrap();
        assert_eq!(parse_response(&text, 2, 2).unwrap(), vec![2, 1]);
        let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["temperature"], 0.2);
        assert_eq!(sent["messages"][0]["role"], "user");
        assert_eq!(sent["messages"][0]["content"], p.render());
    }

    #[test]
    fn http_backend_client_error_not_retried() {
        let (url, server) = serve_once("400 Bad Request", "{\"error\": \"bad\"}".into());
        let backend = HttpBackend::new(LlmBackendConfig {
            endpoint_url: url,
            timeout_s: 10.0,
            max_retries: 3,
            ..Default::default()
        })
        .unwrap();
        let t = RateTable::new(vec![vec![1.0]]).unwrap();
        let p = build_prompt(&t, 1, 1, 1.0, None).unwrap();
        assert!(matches!(backend.complete(&p), Err(LlmError::Transport(m)) if m.contains("400")));
        server.join().unwrap();
    }
}
