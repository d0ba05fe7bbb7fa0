#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tsp_core::formats::InstanceEntry;
use tsp_core::geometry::generate_instance;

/// Stub adapter implementing the train/predict contract. Predictions echo each
/// row's current coordinates, written in reverse row order.
/// `--mode fail|sleep|garbage` before the subcommand injects faults.
pub const STUB_ADAPTER: &str = r#"
import csv, os, sys, time
args = sys.argv[1:]
mode = "ok"
if args and args[0] == "--mode":
    mode, args = args[1], args[2:]
cmd, opts = args[0], dict(zip(args[1::2], args[2::2]))
if mode == "fail":
    print("stub adapter refusing", file=sys.stderr)
    sys.exit(3)
if mode == "sleep":
    time.sleep(30)
if cmd == "train":
    rows = list(csv.DictReader(open(opts["--features"])))
    if "next_x" not in rows[0]:
        print("missing target columns", file=sys.stderr)
        sys.exit(2)
    os.makedirs(opts["--model-out"], exist_ok=True)
    with open(os.path.join(opts["--model-out"], "meta.txt"), "w") as f:
        f.write("rows=%d\n" % len(rows))
elif cmd == "predict":
    assert os.path.isdir(opts["--model"])
    rows = list(csv.DictReader(open(opts["--features"])))
    with open(opts["--out"], "w") as f:
        f.write("row_id,pred_x,pred_y\n")
        for r in reversed(rows):
            if mode == "garbage":
                f.write("%s,nan,0\n" % r["row_id"])
            else:
                f.write("%s,%s,%s\n" % (r["row_id"], r["cur_x"], r["cur_y"]))
else:
    sys.exit(64)
"#;

pub fn write_stub(dir: &Path) -> PathBuf {
    let p = dir.join("stub_adapter.py");
    std::fs::write(&p, STUB_ADAPTER).unwrap();
    p
}

pub fn random_set(n: usize, count: u64, seed0: u64) -> Vec<InstanceEntry> {
    (0..count)
        .map(|s| (generate_instance(n, seed0 + s).unwrap(), None))
        .collect()
}
