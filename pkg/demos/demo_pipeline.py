"""
End-to-end run
==============

Runs every stage on a small synthetic cohort in a temporary directory and
prints the resulting comparison table. The same run from a shell:

    agegaze all --config run.json
"""

import tempfile
from pathlib import Path

from agegaze import pipeline

out = Path(tempfile.mkdtemp()) / "run"
cfg = pipeline.RunConfig(out=str(out), upl_reps=10, n_train=8, working_size=96,
                         synth={"n_images": 15, "width": 96, "height": 72,
                                "group_sizes": {"children": 8, "adults": 8, "elderly": 8}})
report = pipeline.run_all(cfg)
print("report bundle:", report)
print((out / "eval" / "comparison.csv").read_text())
