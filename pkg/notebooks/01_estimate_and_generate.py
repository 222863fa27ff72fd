# %% [markdown]
# # From fixation logs to simulated scanpaths
#
# We start from a synthetic fixation log for two viewer groups, estimate the
# spatially-variant saccade distributions of each group, and use them to
# generate scanpaths on a structured saliency map. Run with
# ``python3 notebooks/01_estimate_and_generate.py``; every cell also works in
# an editor that understands ``# %%`` markers.

# %%
import numpy as np

from saccadic import (
    ViewerProfile,
    batch_generate,
    estimate_spatial_set,
    parse_fixation_log,
    scanpath_plausibility,
)
from saccadic.eyedata import fixation_saliency_map
from saccadic.synthetic import blob_saliency, synthetic_log

W, H, PPD = 480, 360, 12.0

# %% [markdown]
# A log has one row per fixation. The synthetic groups differ in saccade
# length and in how strongly they prefer horizontal saccades.

# %%
log = synthetic_log(["2yo", "adults"], W, H, n_observers=20, n_images=4, ppd=PPD, seed=1)
trials = parse_fixation_log(log, W, H, drop_first=True)
print(log.splitlines()[0])
print(len(trials), "trials")

# %% [markdown]
# Each group gets a 3x3 grid of joint (amplitude, orientation) densities,
# one per screen region. The first fixation of a trial is dropped because it
# depends on where the previous stimulus left the eyes.

# %%
sets = {}
for group in ("2yo", "adults"):
    mine = [t for t in trials if t.group_id == group]
    sets[group] = estimate_spatial_set(mine, PPD)
    centre = sets[group].cells[1][1]
    d = centre.amp_centers
    print(f"{group}: mean amplitude in the centre cell {np.sum(centre.amplitude_marginal() * d):.2f} deg")

# %% [markdown]
# Scanpaths are generated on a saliency map. Each step samples a few
# candidate locations from saliency times memory times the group's saccade
# prior and keeps the best one.

# %%
saliency = blob_saliency(W, H, seed=3)
for group, spatial in sets.items():
    profile = ViewerProfile(spatial, ppd=PPD)
    paths = batch_generate(saliency, profile, n_scanpaths=20, n_fixations=12, master_seed=42)
    kl_amp, kl_joint = scanpath_plausibility(paths, spatial.pooled(), PPD)
    print(f"{group}: KL amplitude {kl_amp:.3f}, KL joint {kl_joint:.3f}")

# %% [markdown]
# Pooling the generated fixations into a blurred map gives the model's
# saliency prediction, which the metrics module can score.

# %%
xy = np.concatenate([p.xy() for p in paths])
predicted = fixation_saliency_map(xy, W, H, PPD)
row, col = np.unravel_index(np.argmax(predicted.values), predicted.shape)
print(f"prediction peaks at x={col}, y={row}")
