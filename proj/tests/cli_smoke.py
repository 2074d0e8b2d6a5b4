"""Exercises each CLI subcommand once on a tiny fixture."""

import json
import pathlib
import subprocess
import sys
import tempfile


def run(cli, *args, expect=0, cwd=None):
    proc = subprocess.run([cli, *args], capture_output=True, text=True, cwd=cwd)
    if proc.returncode != expect:
        sys.exit(f"{' '.join(args)}: exit {proc.returncode}\n{proc.stdout}{proc.stderr}")
    return proc.stdout


def main():
    cli = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        root = pathlib.Path(tmp)
        params = json.dumps({"length": 12, "train_per_class": 3, "test_per_class": 2})
        run(cli, "fixture", "gen", "--kind", "trend", "--params", params, "--seed", "2", "-o", "data", cwd=root)
        run(cli, "sax", "fit", "--train", "data/train.csv", "-s", "4", "-o", "codec.json", cwd=root)
        rows = run(cli, "sax", "transform", "--codec", "codec.json", "--input", "data/test.csv", "--indices", cwd=root)
        assert len(rows.splitlines()) == 8
        for split, prefix in (("train", "tr"), ("test", "te")):
            run(cli, "attn", "gen", "--input", f"data/{split}.csv", "--codec", "codec.json", "--layers", "2",
                "--heads", "2", "--weights", "random", "--seed", "1", "--prefix", prefix, "-o", f"b/{split}.json",
                cwd=root)
        run(cli, "attn", "validate", "b/train.json", "--dataset", "data/train.csv", cwd=root)
        run(cli, "attn", "validate", "b/train.json", "--dataset", "data/test.csv", expect=2, cwd=root)
        (root / "cfg.json").write_text(json.dumps({
            "dataset": {"train": "data/train.csv", "test": "data/test.csv"},
            "attention": {"bundles": {"train": "b/train.json", "test": "b/test.json"}},
            "symbol_count": 4,
        }))
        lama = json.loads(run(cli, "lama", "-c", "cfg.json", "--combo", "hl-sm", "--sample", "te-1", cwd=root))
        assert lama["combo"] == "hl-sm" and len(lama["matrix"]) == 12
        lines = run(cli, "lama", "-c", "cfg.json", "--combo", "lh-msm", "--split", "test", cwd=root).splitlines()
        assert len(lines) == 8
        lasa = json.loads(run(cli, "lasa", "-c", "cfg.json", "--combo", "hl-ssm", "--threshold", "max[1.8,-1]",
                              "--sample", "tr-0", cwd=root))
        assert lasa["t2"] is None and 0.0 <= lasa["reduction"] <= 1.0
        run(cli, "lasa", "-c", "cfg.json", "--combo", "hl-ss", expect=2, cwd=root)
        run(cli, "gcr", "build", "-c", "cfg.json", "--combo", "hl-ss", "--variant", "fcam-sum-t1.3",
            "-o", "m/model.json", "--heatmaps", "m/heat", cwd=root)
        assert any((root / "m/heat").iterdir())
        result = json.loads(run(cli, "gcr", "classify", "--store", "m/model.json", "-c", "cfg.json", cwd=root))
        assert len(result["results"]) == 8 and 0.0 <= result["accuracy"] <= 1.0
        heat = json.loads(run(cli, "gcr", "export", "--store", "m/model.json", "--class", "2", cwd=root))
        assert heat["class"] == 2
        run(cli, "gcr", "build", "-c", "cfg.json", "--variant", "nope", "-o", "x.json", expect=2, cwd=root)
        assert len(run(cli, "metrics", "--input", "data/test.csv", cwd=root).splitlines()) == 8
        (root / "p1.csv").write_text("te-0,0\nte-1,1\n")
        (root / "p2.csv").write_text("sample_id,label\nte-0,0\nte-1,2\n")
        fid = json.loads(run(cli, "metrics", "--predictions", "p1.csv", "--against", "p2.csv", cwd=root))
        assert fid == {"fidelity": 0.5, "samples": 2}, fid
    print("cli smoke ok")


if __name__ == "__main__":
    main()
