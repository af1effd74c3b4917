//! Helpers shared by the CLI integration and acceptance targets: run the
//! binary, manage a `serve` child process, and talk JSON over HTTP.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Output, Stdio};

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_planmine");

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mock")
}

pub fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn planmine<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Runs the mock pipeline into `db` and returns the process output.
pub fn run_pipeline(db: &Path, seed: u64) -> Output {
    planmine([
        "--db".as_ref(),
        db.as_os_str(),
        "pipeline".as_ref(),
        "run".as_ref(),
        "--domain".as_ref(),
        "pandas".as_ref(),
        "--library".as_ref(),
        "pandas".as_ref(),
        "--provider".as_ref(),
        "mock".as_ref(),
        "--seed".as_ref(),
        seed.to_string().as_ref(),
        "--fixtures".as_ref(),
        fixtures_dir().as_os_str(),
    ])
}

pub fn write_config(dir: &Path, db: &Path, listen: &str) -> PathBuf {
    let path = dir.join("planmine.conf");
    let text = format!(
        "# test service\ndb = {}\nlisten = {listen}\nfixtures = {}\nsession_ttl_secs = 600\n",
        db.display(),
        fixtures_dir().display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub struct Server {
    pub child: Child,
    pub addr: String,
    stdout: BufReader<ChildStdout>,
}

impl Server {
    /// Starts `planmine serve` and waits for the bound address. The
    /// server's stderr goes to `<config>.log`.
    pub fn start(config: &Path) -> Result<Server, String> {
        let log = std::fs::File::create(config.with_extension("log")).map_err(|e| e.to_string())?;
        let mut child = Command::new(BIN)
            .args(["--config".as_ref(), config.as_os_str(), "serve".as_ref()])
            .stdout(Stdio::piped())
            .stderr(log)
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut stdout = BufReader::new(child.stdout.take().expect("piped"));
        let mut line = String::new();
        stdout.read_line(&mut line).map_err(|e| e.to_string())?;
        match line.trim().strip_prefix("listening on http://") {
            Some(addr) => Ok(Server { addr: addr.to_string(), child, stdout }),
            None => {
                let status = child.wait().map_err(|e| e.to_string())?;
                let err = std::fs::read_to_string(config.with_extension("log")).unwrap_or_default();
                Err(format!("server exited ({status}) before listening: {err}"))
            }
        }
    }

    pub fn http(&self) -> Http {
        Http::new(&self.addr)
    }

    /// Sends SIGTERM and waits. Returns the exit code and remaining stdout.
    pub fn terminate(mut self) -> (Option<i32>, String) {
        let _ = Command::new("kill").args(["-TERM", &self.child.id().to_string()]).status();
        let mut rest = String::new();
        let _ = self.stdout.read_to_string(&mut rest);
        let status = self.child.wait().expect("child waits");
        (status.code(), rest)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}

pub struct Reply {
    pub status: u16,
    pub body: Value,
    pub session: Option<String>,
}

pub struct Http {
    agent: ureq::Agent,
    base: String,
}

impl Http {
    pub fn new(addr: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Http { agent, base: format!("http://{addr}") }
    }

    pub fn call(&self, method: &str, path: &str, body: Option<&Value>, session: Option<&str>) -> Reply {
        let mut req = ureq::http::Request::builder().method(method).uri(format!("{}{path}", self.base));
        if let Some(s) = session {
            req = req.header("x-session-id", s);
        }
        let resp = match body {
            Some(b) => self
                .agent
                .run(req.header("content-type", "application/json").body(b.to_string()).expect("request builds")),
            None if method == "GET" => self.agent.run(req.body(()).expect("request builds")),
            // an explicit empty body, as browsers send; ureq would otherwise
            // use a chunked body the server may not drain before replying
            None => self.agent.run(req.body(String::new()).expect("request builds")),
        };
        let mut resp = resp.unwrap_or_else(|e| panic!("{method} {path}: {e}"));
        let status = resp.status().as_u16();
        let session = resp.headers().get("x-session-id").and_then(|v| v.to_str().ok()).map(str::to_string);
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        let body = serde_json::from_str(&text).unwrap_or(Value::String(text));
        Reply { status, body, session }
    }

    pub fn get(&self, path: &str) -> Reply {
        self.call("GET", path, None, None)
    }

    pub fn post(&self, path: &str, body: Value) -> Reply {
        self.call("POST", path, Some(&body), None)
    }
}

/// Plan/group cross-references and span validity, read through the API.
pub fn http_integrity(http: &Http, domain: i64) -> Result<(), String> {
    let plans = http.get(&format!("/domains/{domain}/plans")).body;
    let groups = http.get(&format!("/domains/{domain}/groups")).body;
    let (plans, groups) = (plans.as_array().ok_or("plans is not a list")?, groups.as_array().ok_or("groups is not a list")?);
    for p in plans {
        let solution = p["solution"].as_str().ok_or("plan without solution")?;
        let mut prev_end = 0;
        for s in p["changeable_areas"].as_array().ok_or("plan without areas")? {
            let (start, end) = (s["start"].as_u64().unwrap() as usize, s["end"].as_u64().unwrap() as usize);
            if start >= end || end > solution.len() || start < prev_end {
                return Err(format!("plan {} has a bad span {start}..{end}", p["id"]));
            }
            if !solution.is_char_boundary(start) || !solution.is_char_boundary(end) {
                return Err(format!("plan {} span splits a character", p["id"]));
            }
            prev_end = end;
        }
        if let Some(g) = p["group_id"].as_i64() {
            let group = groups.iter().find(|x| x["id"] == g).ok_or(format!("plan {} points at missing group {g}", p["id"]))?;
            if !group["plan_ids"].as_array().unwrap().contains(&p["id"]) {
                return Err(format!("group {g} does not list plan {}", p["id"]));
            }
        }
    }
    for g in groups {
        let ids = g["plan_ids"].as_array().ok_or("group without plan_ids")?;
        if ids.is_empty() {
            return Err(format!("group {} is empty", g["id"]));
        }
        for id in ids {
            let p = plans.iter().find(|p| p["id"] == *id).ok_or(format!("group {} lists missing plan {id}", g["id"]))?;
            if p["group_id"] != g["id"] {
                return Err(format!("plan {id} does not point back at group {}", g["id"]));
            }
        }
    }
    Ok(())
}

/// Writes a small directory of Python files for evaluation runs.
pub fn write_corpus(dir: &Path, files: &[(&str, &str)]) {
    std::fs::create_dir_all(dir).unwrap();
    for (name, text) in files {
        std::fs::write(dir.join(name), text).unwrap();
    }
}

pub const CORPUS_A: &[(&str, &str)] = &[
    ("load.py", "import pandas as pd\ndf = pd.read_csv(\"a.csv\")\nprint(df.head())\n"),
    ("filter.py", "import pandas as pd\ndf = pd.read_csv(\"b.csv\")\nbig = df[df[\"x\"] > 3]\nprint(big.describe())\n"),
    ("group.py", "import pandas as pd\ndf = pd.read_csv(\"c.csv\")\nfor k, g in df.groupby(\"k\"):\n    if len(g) > 2 and k:\n        print(k, g.mean())\n"),
];

pub const CORPUS_B: &[(&str, &str)] = &[
    ("walk.py", "import os\nfor root, dirs, files in os.walk(\".\"):\n    for f in files:\n        if f.endswith(\".py\"):\n            print(os.path.join(root, f))\n"),
    ("count.py", "counts = {}\nfor w in open(\"t.txt\").read().split():\n    counts[w] = counts.get(w, 0) + 1\nprint(sorted(counts.items()))\n"),
    ("retry.py", "import time\nwhile True:\n    try:\n        x = int(input())\n        break\n    except ValueError:\n        time.sleep(1)\n"),
    ("test_skip.py", "assert True\n"),
];
