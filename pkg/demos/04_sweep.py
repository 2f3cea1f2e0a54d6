#%% Seeded sweep over block length
# Writes sweep.csv next to this script (or under POLARCOORD_OUTPUT_DIR).
import os
from pathlib import Path

from polarcoord.simharness import ExperimentConfig, format_summary, run_experiment, summarize

out = Path(os.environ.get("POLARCOORD_OUTPUT_DIR", Path(__file__).parent)) / "sweep.csv"
cfg = ExperimentConfig(m_exponents=[8, 10, 12], k_values=[4], trials_per_point=20, output=str(out))
records = run_experiment(cfg)
print(format_summary(summarize(records, 0.25), 0.25))

#%% Fewer keys per symbol as the chain grows
cfg = ExperimentConfig(m_exponents=[12], k_values=[4, 8, 16], trials_per_point=3, output=str(out))
print(format_summary(summarize(run_experiment(cfg), 0.25), 0.25))
