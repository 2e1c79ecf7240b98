# %% [markdown]
# # Deciding when to send
#
# A node fuses the DoD of its past quanta and of its forecast with a
# geometric mean and sends when the result exceeds theta. A node that stays
# silent for T steps is forced to send. Two reference policies share the
# forced rule: "bm" sends on any change, "pm" sends when Holt's smoothed
# one-step forecast of the quanta exceeds theta.

# %%
import numpy as np

from udsdm.baselines import HoltState, holt_update, pm_decide
from udsdm.decision import fuse, phase_offset

print(fuse(0.9, 0.7), fuse(0.0, 0.9), fuse(0.64, 0.81))
print("offsets for N=6, T=100:", [phase_offset(i, 100, 6) for i in range(6)])

# %% [markdown]
# Holt smoothing on a slow ramp: with theta = 0.6 and a warm-up of ten
# observations the baseline fires once level plus trend crosses the
# threshold.

# %%
h = HoltState()
for t, e in enumerate(np.linspace(0, 1, 40), start=1):
    h = holt_update(h, e)
    if pm_decide(h, 0.6, window=10):
        print("pm fires at step", t, "forecast", round(h.forecast(), 3))
        break
