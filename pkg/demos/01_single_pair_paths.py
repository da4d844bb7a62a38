# Paths between one fixed source and target, drawn by three kinds of agent.
# Fit the latent cost model, then use it to predict, score and clean paths.
#
#   python demos/01_single_pair_paths.py          (EPOCHS=100 for the full run)

import os

import numpy as np

from iolvm import evaluation, metrics, pipeline
from iolvm.model import fit

EPOCHS = int(os.environ.get("EPOCHS", 30))

# %% data
cfg = pipeline.load_config("waxman_single")
ds = pipeline.generate_dataset(cfg)
train, test = pipeline.split(cfg, ds)
g = ds.graph
print(g, "|", len(train), "train /", len(test), "test paths")
print("distinct observed paths:", metrics.distinct_path_count(ds.X))
# agents only differ by a north/south preference, labels never reach the model
print("agents:", np.bincount(ds.meta_column("agent")))

# %% train
tcfg = pipeline.train_config(cfg, "iolvm", epochs=EPOCHS)
model = pipeline.build_model(cfg, g, "iolvm", seed=tcfg.seed)
log = fit(model, train, tcfg)
for r in log[:: max(1, len(log) // 5)]:
    print(f"epoch {r.epoch:3d}  fy {r.fy:.4f}  kl {r.kl:.3f}  iou {r.iou:.3f}")

# %% reconstruction, every output is a valid path by construction
_, rec = evaluation.reconstruction_metrics(model, test)
print(rec)
print(evaluation.euclidean_metrics(test))

# %% distribution of paths, compared with a single-cost perturbed optimizer
po = pipeline.build_model(cfg, g, "po")
fit(po, train, pipeline.train_config(cfg, "po", epochs=EPOCHS))
p = train.requirements[0]
for name, m in (("iolvm", model), ("po", po)):
    dist = evaluation.predict(m, train, p, 1000, rng=1)
    print(name, evaluation.distribution_metrics(g, dist, test))

# %% a path forced around a box in the middle of the map looks unusual
ev = cfg["eval"]
score, held = evaluation.detour_check(model, train, test, tuple(ev["detour_box"]), ev["tau"], 100, 50, rng=0)
print(f"detour score {score:.3f}, held-out scores 50/95/max "
      f"{np.percentile(held, 50):.3f} {np.percentile(held, 95):.3f} {held.max():.3f}")

# %% one-edge detours, then pushed back through the model
before, after, _ = evaluation.denoise_check(model, test, 50, rng=0)
print(f"IoU to clean path: corrupted {before:.3f}, denoised {after:.3f}")
