#%% A model outside the achievable region
# U = S sent over BSC(0.1): the auxiliary carries more than the channel delivers.
import os
from pathlib import Path

from polarcoord.construction import construct
from polarcoord.model import bsc_source_model, check_region_membership
from polarcoord.simharness import ExperimentConfig, format_summary, run_experiment, summarize

bad = bsc_source_model(0.0, 0.1)
rc = check_region_membership(bad)
print(f"member={rc.member} margin={rc.margin:.4f} bits")

#%% Forced anyway: A3 outgrows A2 and only part of it is chained
for n in (256, 1024, 4096):
    s = construct(bad, n, beta=0.275, beta_v=0.08, seed=0, allow_infeasible=True).sets
    print(n, "|A2| =", s.a2.size, "|A3| =", s.a3.size, "carried:", s.a3_carried.size)

#%% Distance does not shrink with n
out = Path(os.environ.get("POLARCOORD_OUTPUT_DIR", Path(__file__).parent)) / "negative_control.csv"
cfg = ExperimentConfig(model="negative_control", allow_infeasible=True, trials_per_point=20, output=str(out))
print(format_summary(summarize(run_experiment(cfg), 0.25), 0.25))
