# %% [markdown]
# # Comparing policies on a sensor replay
#
# Six nodes replay a synthetic log in the Intel Lab layout. For each policy,
# threshold and epoch length we measure
#
# * phi: mean time between sends as a fraction of T,
# * delta: mean L1 drift of the synopsis at the moment it is sent,
# * psi: T over the number of sends in each epoch window.
#
# This is a reduced version (two experiments, first 40k records) of the
# desk-scale run in the acceptance suite; expect about a minute.

# %%
import tempfile
from dataclasses import replace
from pathlib import Path

from udsdm.ingest import synthesize_lab_file
from udsdm.simulator import ModelCache, SimConfig, compare

work = Path(tempfile.mkdtemp())
log = synthesize_lab_file(work / "lab.txt")
base = SimConfig(n_nodes=6, dataset=str(log), max_records=40_000, experiments=2)
configs = [replace(base, policy=p, theta=th, epoch_length=T)
           for p in ("bm", "pm", "udsdm") for th in (0.6, 0.75) for T in (100, 500)]
rows = compare(configs, ModelCache())

# %%
print(f"{'policy':6} {'theta':>5} {'T':>5} {'phi':>6} {'delta':>6} {'psi':>7} {'vol':>6} {'forced':>6}")
for r in rows:
    print(f"{r.policy:6} {r.theta:5.2f} {r.T:5d} {r.phi:6.3f} {r.delta:6.3f} {r.psi:7.2f} "
          f"{r.messages_voluntary:6d} {r.messages_forced:6d}")

# %% [markdown]
# Any change counts for "bm", so it sends almost every step (phi near 1/T,
# psi near 1). The predictive policies send at a pace set by the data rather
# than by T, so their phi shrinks as T grows, while a higher theta makes them
# wait longer and lets more drift build up before a send.
