# %% [markdown]
# # Scoring saliency predictions
#
# The metrics module compares a predicted saliency map with a human map
# (CC, SIM, EMD) and with raw human fixations (NSS, AUC-Judd, AUC-Borji).
# Here the "human" data come from the full model itself, and we score the
# full model against two ablations: one without spatial variation of the
# saccade prior and one without any saccade prior.

# %%
import numpy as np

from saccadic import ViewerProfile, auc_borji, auc_judd, batch_generate, evaluate_all
from saccadic.eyedata import fixation_saliency_map
from saccadic.metrics import format_report_rows
from saccadic.synthetic import analytic_spatial_set, blob_saliency

W, H, PPD = 480, 360, 12.0

# %% [markdown]
# Sanity first: a map scored against itself is perfect, and a constant map
# sits at chance for the AUC variants.

# %%
saliency = blob_saliency(W, H, seed=5)
rng = np.random.default_rng(0)
fx = np.column_stack([rng.uniform(0, W, 300), rng.uniform(0, H, 300)])
self_score = evaluate_all(saliency, saliency, fx)
print("self:", {k: round(self_score.values()[k], 3) for k in ("cc", "sim", "emd")})
constant = np.ones((H, W))
print("constant map AUC-Judd", auc_judd(constant, fx), "AUC-Borji", auc_borji(constant, fx))

# %% [markdown]
# Ground truth: 40 scanpaths from the full adult model.

# %%
full = ViewerProfile(analytic_spatial_set("adults", W, H), ppd=PPD)
truth = batch_generate(saliency, full, 40, 12, master_seed=1)
human_fx = np.concatenate([p.xy() for p in truth])
human_map = fixation_saliency_map(human_fx, W, H, PPD)

# %% [markdown]
# Each model's prediction is the blurred map of its own generated fixations.

# %%
models = {"full": full, "nsv": full.non_spatial(), "uniform prior": full.with_uniform_prior()}
rows = []
for k, (name, profile) in enumerate(models.items()):
    paths = batch_generate(saliency, profile, 40, 12, master_seed=100 + k)
    predicted = fixation_saliency_map(np.concatenate([p.xy() for p in paths]), W, H, PPD)
    rows.append(("blobs", "adults", name, evaluate_all(predicted, human_map, human_fx, n_splits=20)))
print(format_report_rows(rows))

# %% [markdown]
# The differences between the variants are small on one image; the
# acceptance suite repeats this over five images to look at the ordering.
