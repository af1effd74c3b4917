//! Deterministic stand-in for a chat model, used to record the mock fixture
//! corpus. It answers every pipeline prompt for a pandas-style domain: a
//! catalog of 100 use cases, one program per use case (exactly one with a
//! syntax error), subgoal comments per code block, string-literal changeable
//! areas and cluster names derived from member goals.

use std::collections::HashMap;

use planmine_core::llm::{CompletionProvider, LlmError, Placeholder, PromptKind, PromptRequest};

struct Theme {
    name: &'static str,
    file: &'static str,
    num: &'static str,
    cat: &'static str,
    date: &'static str,
    threshold: &'static str,
}

const THEMES: [Theme; 10] = [
    Theme { name: "sales", file: "sales.csv", num: "revenue", cat: "region", date: "order_date", threshold: "1000" },
    Theme { name: "student grades", file: "grades.csv", num: "score", cat: "course", date: "exam_date", threshold: "70" },
    Theme { name: "weather", file: "weather.csv", num: "temperature", cat: "city", date: "date", threshold: "30" },
    Theme { name: "employee", file: "employees.csv", num: "salary", cat: "department", date: "hire_date", threshold: "50000" },
    Theme { name: "movie ratings", file: "movies.csv", num: "rating", cat: "genre", date: "release_date", threshold: "8" },
    Theme { name: "flight delays", file: "flights.csv", num: "delay_minutes", cat: "airline", date: "flight_date", threshold: "60" },
    Theme { name: "housing prices", file: "housing.csv", num: "price", cat: "neighborhood", date: "sale_date", threshold: "300000" },
    Theme { name: "hospital visits", file: "visits.csv", num: "wait_time", cat: "clinic", date: "visit_date", threshold: "45" },
    Theme { name: "online orders", file: "orders.csv", num: "quantity", cat: "category", date: "order_date", threshold: "10" },
    Theme { name: "sensor readings", file: "sensors.csv", num: "reading", cat: "sensor_id", date: "timestamp", threshold: "0.5" },
];

/// Index of the one use case whose program does not parse.
pub const BROKEN_USE_CASE: usize = 41;

/// Goal prefix → cluster name.
const NAMES: [(&str, &str); 16] = [
    ("Import", "Importing libraries"),
    ("Load the lookup", "Loading a lookup table"),
    ("Load the", "Reading a CSV file into a DataFrame"),
    ("Compute the average", "Averaging a column per group"),
    ("Sort the records", "Finding the top rows by a column"),
    ("Keep only rows", "Filtering rows by a condition"),
    ("Fill missing", "Filling missing values with the mean"),
    ("Save the result", "Writing a DataFrame to CSV"),
    ("Merge", "Merging DataFrames on a key"),
    ("Count the records", "Counting values per category"),
    ("Convert the", "Parsing dates with to_datetime"),
    ("Extract the month", "Extracting date parts"),
    ("Build a pivot", "Building a pivot table"),
    ("Plot a histogram", "Plotting a histogram"),
    ("Save the plot", "Saving a figure"),
    ("Drop duplicate", "Removing duplicate rows"),
];

type Step = (String, String);

fn steps(task: usize, t: &Theme) -> (String, Vec<Step>) {
    let stem = t.file.trim_end_matches(".csv");
    let s = |g: String, c: String| (g, c);
    let import = s("Import the pandas library".into(), "import pandas as pd".into());
    let load = s(format!("Load the {} data from a CSV file", t.name), format!("df = pd.read_csv(\"{}\")", t.file));
    let (num, cat, date) = (t.num, t.cat, t.date);
    let save = |suffix: &str| {
        s("Save the result to a new CSV file".into(), format!("df.to_csv(\"{stem}_{suffix}.csv\", index=False)"))
    };
    let to_dt = s(format!("Convert the {date} column to datetime"), format!("df[\"{date}\"] = pd.to_datetime(df[\"{date}\"])"));
    match task {
        0 => (
            format!("Calculate the average {num} for each {cat} in a {} dataset", t.name),
            vec![
                import,
                load,
                s(
                    format!("Compute the average {num} for each {cat}"),
                    format!("averages = df.groupby(\"{cat}\")[\"{num}\"].mean()\nprint(averages)"),
                ),
            ],
        ),
        1 => (
            format!("Find the five {} records with the highest {num}", t.name),
            vec![
                import,
                load,
                s(
                    format!("Sort the records by {num} and keep the top 5"),
                    format!("top = df.sort_values(\"{num}\", ascending=False).head(5)\nprint(top)"),
                ),
            ],
        ),
        2 => (
            format!("Select the {} rows where {num} is greater than {}", t.name, t.threshold),
            vec![
                import,
                load,
                s(
                    format!("Keep only rows where {num} is above {}", t.threshold),
                    format!("high = df[df[\"{num}\"] > {}]\nprint(len(high))", t.threshold),
                ),
            ],
        ),
        3 => (
            format!("Replace missing {num} values with the mean in a {} dataset", t.name),
            vec![
                import,
                load,
                s(
                    format!("Fill missing {num} values with the column mean"),
                    format!("df[\"{num}\"] = df[\"{num}\"].fillna(df[\"{num}\"].mean())"),
                ),
                save("filled"),
            ],
        ),
        4 => (
            format!("Combine {} data with a {cat} lookup table", t.name),
            vec![
                import,
                load,
                s(format!("Load the lookup table for {cat}"), format!("lookup = pd.read_csv(\"{cat}_info.csv\")")),
                s(
                    format!("Merge the data with the lookup table on {cat}"),
                    format!("merged = pd.merge(df, lookup, on=\"{cat}\", how=\"left\")\nprint(merged.head())"),
                ),
            ],
        ),
        5 => (
            format!("Count how many {} records belong to each {cat}", t.name),
            vec![
                import,
                load,
                s(format!("Count the records in each {cat}"), format!("counts = df[\"{cat}\"].value_counts()\nprint(counts)")),
            ],
        ),
        6 => (
            format!("Extract the month from the {date} column of {} data", t.name),
            vec![
                import,
                load,
                to_dt,
                s(
                    "Extract the month from each date".into(),
                    format!("df[\"month\"] = df[\"{date}\"].dt.month\nprint(df[[\"{date}\", \"month\"]].head())"),
                ),
            ],
        ),
        7 => (
            format!("Summarize {num} by {cat} and month in a pivot table for {} data", t.name),
            vec![
                import,
                load,
                to_dt,
                s(
                    format!("Build a pivot table of {num} by {cat} and month"),
                    format!(
                        "df[\"month\"] = df[\"{date}\"].dt.month\ntable = pd.pivot_table(df, values=\"{num}\", index=\"{cat}\", columns=\"month\", aggfunc=\"sum\")\nprint(table)"
                    ),
                ),
            ],
        ),
        8 => (
            format!("Plot a histogram of {num} from {} data", t.name),
            vec![
                s("Import pandas and matplotlib".into(), "import pandas as pd\nimport matplotlib.pyplot as plt".into()),
                load,
                s(
                    format!("Plot a histogram of {num}"),
                    format!("df[\"{num}\"].plot(kind=\"hist\", bins=20)\nplt.xlabel(\"{num}\")"),
                ),
                s("Save the plot to an image file".into(), format!("plt.savefig(\"{stem}_hist.png\")")),
            ],
        ),
        _ => (
            format!("Remove duplicate rows from a {} dataset and save the result", t.name),
            vec![
                import,
                load,
                s(
                    "Drop duplicate rows".into(),
                    "before = len(df)\ndf = df.drop_duplicates()\nprint(before - len(df), \"duplicates removed\")".into(),
                ),
                save("clean"),
            ],
        ),
    }
}

pub struct SyntheticProvider {
    use_cases: Vec<String>,
    programs: HashMap<String, String>,
    goals: HashMap<String, String>,
}

impl Default for SyntheticProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl SyntheticProvider {
    pub fn new() -> Self {
        let mut use_cases = Vec::with_capacity(100);
        let mut programs = HashMap::new();
        let mut goals = HashMap::new();
        for i in 0..100 {
            let (row, col) = (i / 10, i % 10);
            let theme = &THEMES[col];
            let task = (row + col) % 10;
            let (description, blocks) = steps(task, theme);
            let mut code = blocks.iter().map(|(_, c)| c.as_str()).collect::<Vec<_>>().join("\n\n");
            code.push('\n');
            if i == BROKEN_USE_CASE {
                // Drop the final closing parenthesis.
                let at = code.rfind(')').expect("every program ends in a call");
                code.remove(at);
            }
            for (g, c) in blocks {
                goals.insert(c, g);
            }
            programs.insert(description.clone(), code);
            use_cases.push(description);
        }
        SyntheticProvider { use_cases, programs, goals }
    }

    #[cfg(test)]
    pub fn use_cases(&self) -> &[String] {
        &self.use_cases
    }

    fn annotate(&self, code: &str) -> String {
        let mut out = String::new();
        for (i, block) in code.trim_end().split("\n\n").enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let goal = self.goals.get(block).map_or("Run the next step", String::as_str);
            out.push_str(&format!("# {goal}\n{block}\n"));
        }
        out
    }
}

fn value<'a>(r: &'a PromptRequest, p: Placeholder) -> &'a str {
    r.values.iter().find(|(k, _)| *k == p).map_or("", |(_, v)| v.as_str())
}

/// Double-quoted literals and the number after a `>` comparison.
fn changeable(code: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = code;
    while let Some(open) = rest.find('"') {
        let Some(len) = rest[open + 1..].find('"') else { break };
        let lit = &rest[open..open + len + 2];
        if !out.iter().any(|x| x == lit) {
            out.push(lit.to_string());
        }
        rest = &rest[open + len + 2..];
    }
    if let Some(at) = code.find("] > ") {
        let n: String = code[at + 4..].chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
        if !n.is_empty() {
            out.push(n);
        }
    }
    out
}

fn cluster_name(text: &str) -> String {
    let mut tally: Vec<(&str, usize)> = Vec::new();
    for goal in text.lines().filter_map(|l| l.strip_prefix("# ")) {
        let name = NAMES.iter().find(|(p, _)| goal.starts_with(p)).map_or("Processing data", |(_, n)| n);
        match tally.iter_mut().find(|(n, _)| *n == name) {
            Some((_, c)) => *c += 1,
            None => tally.push((name, 1)),
        }
    }
    let best = tally.iter().fold(None::<(&str, usize)>, |acc, &(n, c)| match acc {
        Some((_, bc)) if bc >= c => acc,
        _ => Some((n, c)),
    });
    best.map_or("Processing data", |(n, _)| n).to_string()
}

impl CompletionProvider for SyntheticProvider {
    fn id(&self) -> &str {
        "synthetic"
    }

    fn complete(&self, r: &PromptRequest) -> Result<String, LlmError> {
        Ok(match r.kind {
            PromptKind::UseCases => self
                .use_cases
                .iter()
                .enumerate()
                .map(|(i, u)| format!("{}. {u}\n", i + 1))
                .collect(),
            PromptKind::CodeForUseCase => {
                let uc = value(r, Placeholder::UseCase);
                let code = self
                    .programs
                    .get(uc)
                    .ok_or_else(|| LlmError::Malformed(format!("unknown use case `{uc}`")))?;
                format!("```python\n{code}```")
            }
            PromptKind::SubgoalAnnotate => format!("```python\n{}```", self.annotate(value(r, Placeholder::FullProgram))),
            PromptKind::ChangeableAreas => changeable(value(r, Placeholder::CodeSnippet))
                .iter()
                .map(|f| format!("```\n{f}\n```\n"))
                .collect(),
            PromptKind::ClusterName => format!("Name: {}", cluster_name(value(r, Placeholder::ProgramsInCluster))),
            PromptKind::ExplainSelection => format!(
                "The selected code `{}` is one step of the program: it prepares or reports the data the rest of the script works with.",
                value(r, Placeholder::Selection).trim()
            ),
            PromptKind::PredictOutput => "The script reads a CSV file that is not available here.\nOUTPUT:\n".into(),
        })
    }
}
