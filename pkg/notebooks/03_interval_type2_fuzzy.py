# %% [markdown]
# # Interval type-2 fuzzy scoring
#
# Three normalised quanta go in; a degree of distribution (DoD) in [0, 1]
# comes out. Each of the terms low, medium and high has an upper triangular
# membership function and a lower one scaled down from it. The band between
# them expresses uncertainty about the membership itself.

# %%
import itertools

import numpy as np

from udsdm.fuzzy import FuzzySystem, IT2Set, km_type_reduce, load_fuzzy_config, membership

fls = FuzzySystem()
for term, s in fls.sets.items():
    print(term, (s.left, s.apex, s.right), "lower scale", s.lower_scale)

# %%
s = IT2Set("medium", 0.2, 0.45, 0.7, lower_scale=0.25)
print("membership of 0.25:", membership(s, 0.25))

# %% [markdown]
# ## Rules and type reduction
#
# The 27 rules map each combination of input terms to the term nearest the
# mean of their indices. Karnik-Mendel iterations find the smallest and
# largest weighted average of the consequent centroids, and the DoD is the
# midpoint of that interval.

# %%
for triple in [(0, 0, 0), (0.2, 0.3, 0.25), (0.5, 0.5, 0.5), (0.9, 0.8, 1.0), (1, 1, 1)]:
    yl, yr = fls.type_reduce(np.array(triple, dtype=float))
    print(triple, "interval", (round(float(yl), 4), round(float(yr), 4)), "DoD", round(fls.infer_dod(triple), 4))

# %% [markdown]
# Karnik-Mendel against brute force on a small instance:

# %%
lower, upper, c = np.array([0.2, 0.4, 0.1]), np.array([0.6, 0.8, 0.3]), np.array([0.2, 0.5, 0.8])
grid = [np.arange(lo, up + 1e-9, 0.01) for lo, up in zip(lower, upper)]
y = [np.dot(f, c) / sum(f) for f in itertools.product(*grid)]
print("KM   ", km_type_reduce(lower, upper, c, c))
print("grid ", (min(y), max(y)))

# %% [markdown]
# ## Shape of the output surface
#
# The DoD rises along the diagonal but, with the minimum t-norm, not strictly
# in every single input: lowering one input's "low" grade can drop a
# medium rule's firing while the low rules stay pinned by the other inputs.

# %%
xs = np.linspace(0, 1, 11)
print("diagonal", np.round(fls.infer_dod(np.stack([xs, xs, xs], axis=1)), 3))
print("one input", np.round(fls.infer_dod(np.stack([xs, np.full(11, 0.45), np.full(11, 0.45)], axis=1)), 4))

# %% [markdown]
# Sets and centroids can be overridden from a key-value file or string.

# %%
custom = load_fuzzy_config("mf.medium = 0.2, 0.5, 0.8\nlower_scale = 0.6\n")
print(custom.infer_dod((0.5, 0.5, 0.5)), fls.infer_dod((0.5, 0.5, 0.5)))
