"""
Train/test evaluation on a case-control matrix
==============================================

Write a synthetic two-group data matrix to CSV, then score each correction by
how close its training-half estimates land to the test-half statistics.
"""

import tempfile
from pathlib import Path

from selbias.evaluation import rows_to_table
from selbias.harness import ScenarioKind, make_two_sample_data, run_real_data, scaled_preset
from selbias.stats import write_csv

# %%
# 40 controls and 40 cases over 200 features; the cases have their own
# correlation structure.
D, truth = make_two_sample_data(scaled_preset(ScenarioKind.TWO_SAMPLE), seed=7)
path = Path(tempfile.mkdtemp()) / "expression.csv"
write_csv(D, path)
print(f"wrote {D.n} x {D.p} matrix to {path}")

# %%
# Ten random stratified half splits; smaller test SSD is better.
cfg = scaled_preset(ScenarioKind.REAL_DATA, replications=10, B=100)
rows = run_real_data(cfg, path)
print(rows_to_table([r for r in rows if r.k == 25]))
