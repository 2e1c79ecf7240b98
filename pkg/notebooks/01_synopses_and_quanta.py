# %% [markdown]
# # Synopses and update quanta
#
# Every edge node summarises its sensor stream by the running mean and
# population standard deviation of each dimension. The update quantum is the
# L1 distance between the current synopsis and the one the node last sent.
# This script walks through both on a synthetic sensor log.

# %%
import tempfile
from pathlib import Path

import numpy as np

from udsdm.ingest import build_streams, parse_dataset, synthesize_lab_file
from udsdm.synopsis import (
    NormalizationCalibration,
    Synopsis,
    synopsis_trajectory,
    update_quantum,
    update_synopsis,
)

work = Path(tempfile.mkdtemp())
log = synthesize_lab_file(work / "lab.txt", n_epochs=300, seed=1)
records, rejects = parse_dataset(log)
print(f"{len(records)} records accepted, {rejects.total} rejected")
print(rejects.as_dict())

# %% [markdown]
# Motes are dealt to nodes round-robin. With 54 motes and 6 nodes each node
# hosts 9 of them, interleaved in time order.

# %%
streams = build_streams(records, 6)
for s in streams:
    print(s.node_id, len(s), sorted(s.source_motes))

# %% [markdown]
# ## Incremental synopsis
#
# Welford's recurrence keeps the update O(d) per vector. The batch helper
# gives bit-identical values for a whole stream.

# %%
x = streams[0].vectors
syn = Synopsis.empty(4)
for v in x[:200]:
    syn = update_synopsis(syn, v)
traj = synopsis_trajectory(x[:200])
assert np.array_equal(traj[-1], syn.values)
print("mean", np.round(syn.mean, 3))
print("std ", np.round(syn.std, 3))
print("numpy check", np.allclose(syn.std, x[:200].std(axis=0)))

# %% [markdown]
# ## Quanta and normalisation
#
# If nothing is sent, the quantum grows as the synopsis drifts away from the
# last sent one. Normalisation maps raw quanta into [0, 1] with a min-max
# range learned on the training part of the stream; values outside clamp.

# %%
q = np.array([update_quantum(Synopsis(traj[i]), Synopsis(traj[99])).value for i in range(100, 200)])
cal = NormalizationCalibration.fit(q[:50])
print("raw quanta  ", np.round(q[::10], 3))
print("normalised  ", np.round(cal.apply(q[::10]), 3))
