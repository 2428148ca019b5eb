"""Regenerate configs/synthetic.json: score epoch counts on the tuning pair and freeze the choice.

    python3 scripts/epoch_sensitivity.py [--out /tmp/sens]

Takes about 10 minutes on one core. The tuning pair is never a test pair, so
the frozen table does not peek at the folds that are scored later.
"""
import argparse
import json
import sys
from pathlib import Path

from pvquant.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run(out: Path) -> int:
    cfg = json.loads((ROOT / "configs" / "synthetic.json").read_text())
    syn = [f"{k}={v}" for k, v in cfg["synthetic"].items()]
    code = main(["sensitivity", "--synthetic", *syn, "--seed", str(cfg["seed"]), "--models", ",".join(cfg["models"]),
                 "--gates", "Intra06,Intra12,Intra00", "--out", str(out), "-v"])
    if code:
        return code
    sens = json.loads((out / "sensitivity.json").read_text())
    cfg["epochs"] = sens["epochs"]
    (ROOT / "configs" / "synthetic.json").write_text(json.dumps(cfg, indent=1) + "\n")
    (ROOT / "configs" / "synthetic_sensitivity.json").write_text(json.dumps(sens, indent=1) + "\n")
    return 0


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("out/sensitivity"))
    sys.exit(run(p.parse_args().out))
