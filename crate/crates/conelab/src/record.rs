use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Measured value with no threshold attached.
    Info,
    /// The sweep point did not complete.
    Error,
}

impl Verdict {
    pub fn from_check(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Fail | Verdict::Error)
    }
}

/// One CSV row of the run store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: String,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub grid: Option<usize>,
    #[serde(rename = "L")]
    pub len: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub p: Option<f64>,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub seed: u64,
    pub runtime_ms: Option<u64>,
    pub verdict: Verdict,
}

impl Record {
    pub fn new(scenario: &str, quantity: &str, value: f64, seed: u64) -> Record {
        Record {
            scenario: scenario.to_string(),
            n: None,
            grid: None,
            len: None,
            delta: None,
            alpha: None,
            beta: None,
            lambda: None,
            p: None,
            quantity: quantity.to_string(),
            value,
            stderr: None,
            slope: None,
            r2: None,
            seed,
            runtime_ms: None,
            verdict: Verdict::Info,
        }
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn grid(mut self, grid: usize, len: f64) -> Self {
        self.grid = Some(grid);
        self.len = Some(len);
        self
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn weight(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = Some(alpha);
        self.beta = Some(beta);
        self
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn stderr(mut self, stderr: f64) -> Self {
        self.stderr = Some(stderr);
        self
    }

    pub fn fit(mut self, slope: f64, r2: f64) -> Self {
        self.slope = Some(slope);
        self.r2 = Some(r2);
        self
    }

    pub fn check(mut self, ok: bool) -> Self {
        self.verdict = Verdict::from_check(ok);
        self
    }

    pub fn error(scenario: &str, point: &str, seed: u64) -> Record {
        let mut r = Record::new(scenario, &format!("error:{point}"), f64::NAN, seed);
        r.verdict = Verdict::Error;
        r
    }
}
