//! Synthetic dataset and scripted transcripts shared by integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mlagent_core::coding::{LoopSettings, RunOutcome, run_iterative_loop};
use mlagent_core::config::KernelConfig;
use mlagent_core::llm::{Gateway, ScriptedBackend};
use mlagent_core::perception::{PerceptionContext, perceive};
use mlagent_core::registry::default_registry;
use mlagent_core::sandbox::{Sandbox, SandboxSettings, prepare_workspace};
use mlagent_core::semantic::KnowledgeDocument;

pub const FAILING_STDERR: &str = "Traceback (most recent call last):\nKeyError: 'label'";

fn png(width: u32, height: u32) -> Vec<u8> {
    let mut b = vec![
        0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A, 0, 0, 0, 13, b'I', b'H', b'D', b'R',
    ];
    b.extend_from_slice(&width.to_be_bytes());
    b.extend_from_slice(&height.to_be_bytes());
    b.extend_from_slice(&[8, 0, 0, 0, 0, 0, 0, 0, 0]);
    b
}

/// Small abalone-like folder: two tables, a description, a binary blob and
/// seven image folders that collapse into one wildcard group.
pub fn write_dataset(root: &Path) {
    std::fs::create_dir_all(root.join("images")).unwrap();
    std::fs::write(
        root.join("train.csv"),
        "Sex,Length,Diameter,Class_number_of_rings\nI,0.620,0.485,9\nF,0.645,0.525,11\nF,0.620,0.480,10\nM,0.505,0.390,8\n",
    )
    .unwrap();
    std::fs::write(
        root.join("test.csv"),
        "Sex,Length,Diameter,Class_number_of_rings\nM,0.455,0.365,7\n",
    )
    .unwrap();
    std::fs::write(
        root.join("descriptions.txt"),
        "Regression on Class_number_of_rings. Eval metric is RMSE.\n",
    )
    .unwrap();
    std::fs::write(root.join("blob.bin"), [0u8, 159, 146, 150, 0, 1, 2, 3]).unwrap();
    for i in 0..7 {
        let dir = root.join(format!("images/class{i}"));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join(format!("img{i}.png")), png(4 + i, 3)).unwrap();
    }
}

pub fn knowledge_base() -> Vec<KnowledgeDocument> {
    vec![
        KnowledgeDocument {
            tool_name: "autogluon.tabular".into(),
            title: "Quick Start".into(),
            summary: "Summary: fitting a TabularPredictor and predicting on test data.".into(),
            condensed_body: "Use `TabularPredictor(label=...).fit(train)`.".into(),
            source_path: PathBuf::from("quick_start.md"),
        },
        KnowledgeDocument {
            tool_name: "autogluon.tabular".into(),
            title: "Feature Engineering".into(),
            summary: "Summary: automatic feature generators for text and dates.".into(),
            condensed_body: "Feature generators run inside fit.".into(),
            source_path: PathBuf::from("features.md"),
        },
    ]
}

/// Perception responses for [`write_dataset`].
pub fn push_perception(backend: &ScriptedBackend, data_root: &Path) {
    backend.push_keyed(
        "file_reader",
        ["```python\nprint('File Size: 0.00 MB')\nprint('Binary payload of 8 bytes')\n```"],
    );
    backend.push_keyed(
        "description_finder",
        [format!(
            "Description Files: {}\nExplanation: It names the target and the metric.",
            data_root.join("descriptions.txt").display()
        )],
    );
    backend.push_keyed(
        "task_describer",
        ["Regression task: predict Class_number_of_rings from physical measurements. Evaluation metric: RMSE."],
    );
    backend.push_keyed(
        "tool_selector",
        ["Selected Tool: autogluon.tabular\nExplanation: The data is a single tabular regression problem."],
    );
}

pub fn failing_iteration(backend: &ScriptedBackend) {
    backend.push_keyed("retriever", ["1"]);
    backend.push_keyed(
        "python_coder",
        ["```python\nimport pandas as pd\ndf = pd.read_csv('train.csv')\nprint(df['label'])\n```"],
    );
    backend.push_keyed(
        "bash_coder",
        [format!("```bash\necho \"{FAILING_STDERR}\" >&2\nexit 1\n```")],
    );
    backend.push_keyed(
        "executer",
        ["DECISION: FIX\nANALYSIS: The script crashed with KeyError 'label'."],
    );
    backend.push_keyed(
        "error_analyzer",
        ["ERROR SUMMARY: The script reads a column named 'label' that does not exist.\n\nSUGGESTED FIX: Use Class_number_of_rings as the label column."],
    );
}

pub fn passing_iteration(backend: &ScriptedBackend) {
    backend.push_keyed("retriever", ["1,2"]);
    backend.push_keyed("python_coder", ["```python\nprint('trained')\n```"]);
    backend.push_keyed(
        "bash_coder",
        ["```bash\nprintf 'Class_number_of_rings\\n9\\n' > results.csv\necho trained\n```"],
    );
    backend.push_keyed("executer", ["DECISION: FINISH\nANALYSIS: None"]);
}

/// Defaults with terminal streaming off and a short kill grace.
pub fn quiet_config() -> KernelConfig {
    let mut cfg = KernelConfig {
        stream_output: false,
        ..KernelConfig::default()
    };
    cfg.sandbox.kill_grace_seconds = 1;
    cfg
}

pub struct Scenario {
    pub _data: tempfile::TempDir,
    pub _out: tempfile::TempDir,
    pub data_root: PathBuf,
    pub out_root: PathBuf,
    pub backend: Arc<ScriptedBackend>,
    pub gateway: Gateway,
    pub sandbox: Sandbox,
    pub cfg: KernelConfig,
}

impl Scenario {
    pub fn new(cfg: KernelConfig) -> Self {
        let data = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_dataset(data.path());
        let data_root = data.path().canonicalize().unwrap();
        let backend = Arc::new(ScriptedBackend::new(Vec::<String>::new()));
        let gateway = Gateway::new(backend.clone());
        let ws = prepare_workspace(out.path()).unwrap();
        let out_root = ws.root().to_path_buf();
        let sandbox = Sandbox::new(ws, SandboxSettings::from_config(&cfg));
        Self {
            _data: data,
            _out: out,
            data_root,
            out_root,
            backend,
            gateway,
            sandbox,
            cfg,
        }
    }

    pub fn perceive(&self) -> PerceptionContext {
        push_perception(&self.backend, &self.data_root);
        perceive(
            &self.data_root,
            &self.cfg,
            &default_registry(),
            &self.gateway,
            &self.sandbox,
        )
        .unwrap()
    }

    pub fn run(&self, ctx: &PerceptionContext, kb: &[KnowledgeDocument], user_input: &str) -> RunOutcome {
        let settings = LoopSettings::from_config(&self.cfg);
        run_iterative_loop(ctx, kb, user_input, &settings, &self.gateway, &self.sandbox).unwrap()
    }

    /// Replaces temp-dir paths so prompts can be compared across runs.
    pub fn normalize(&self, text: &str) -> String {
        text.replace(&*self.data_root.to_string_lossy(), "<DATA>")
            .replace(&*self.out_root.to_string_lossy(), "<OUT>")
    }
}
