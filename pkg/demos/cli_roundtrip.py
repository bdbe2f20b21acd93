"""Drive the command line tool: run, then re-check an archive.

Writes a small configuration to a temporary directory, runs a two-stage
continuation through ``pfsi run``, and asks ``pfsi check`` to recompute the
diagnostics of the last archive from its stored coefficients.
"""

from pathlib import Path
import tempfile

from pfsi.cli import main

CONFIG = """\
L: 1
H: 1
T: 1
m0: 2
gamma: 2
forcing:
  f: [[1.0, 1, 1]]
  F: [[0.1, 2, 1]]
schedule:
  - {eps: 0.1, delta: 0.1}
  - {eps: 0.01, delta: 0.01}
"""

with tempfile.TemporaryDirectory() as tmp:
    cfg = Path(tmp) / "run.yaml"
    cfg.write_text(CONFIG)
    out = Path(tmp) / "out"
    print("pfsi run ->", main(["run", "--config", str(cfg), "--out", str(out)]))
    print(sorted(p.name for p in out.iterdir()))
    print("pfsi check ->", main(["check", str(out / "stage1.pfsi")]))
