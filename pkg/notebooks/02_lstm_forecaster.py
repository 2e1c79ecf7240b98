# %% [markdown]
# # A numpy LSTM for three-step quanta forecasts
#
# The forecaster reads the last three normalised quanta, then feeds its own
# predictions back to produce the next three. Everything, including
# backpropagation through time, is plain numpy.

# %%
import numpy as np

from udsdm.lstm import LstmCell, TrainConfig, forecast3, gradient_check, sliding_windows, train, window_loss

rng = np.random.default_rng(0)

# %% [markdown]
# ## Gradients
#
# Analytic gradients are checked against central differences on a small
# random cell. The error printed is the worst relative disagreement over all
# parameters.

# %%
for H in (1, 4, 8):
    cell = LstmCell.random(H, rng, scale=0.5)
    print(H, gradient_check(cell, rng.uniform(0, 1, (2, 9))))

# %% [markdown]
# ## Learning a ramp-and-reset pattern
#
# Quanta accumulate between disseminations and fall to zero when the node
# sends, so training windows come from separate segments and never cross a
# reset.

# %%
segments = [np.clip(np.linspace(0, 1, 10) + rng.normal(0, 0.03, 10), 0, 1) for _ in range(40)]
cfg = TrainConfig(epochs=60, hidden_size=16)
X = sliding_windows(segments, cfg.window_length)
print("windows", X.shape)
cell = train(segments, cfg)
print("initial loss", window_loss(LstmCell.random(16, np.random.default_rng(cfg.seed)), X))
print("trained loss", window_loss(cell, X))

# %%
for past in [(0.0, 0.1, 0.2), (0.4, 0.5, 0.6), (0.7, 0.8, 0.9)]:
    print(past, "->", np.round(forecast3(cell, past), 3))
