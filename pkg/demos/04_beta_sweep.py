# Weight on the KL term against diversity of reconstructed paths.
# Larger beta pulls posteriors to the prior, fewer distinct paths come back.

import os

from scipy.stats import spearmanr

from iolvm import evaluation, pipeline

EPOCHS = int(os.environ.get("EPOCHS", 30))
BETAS = [0.01, 0.1, 1, 10]

cfg = pipeline.load_config("waxman_single")
train, test = pipeline.split(cfg, pipeline.generate_dataset(cfg))
rows = evaluation.sweep_beta(cfg, train, test, BETAS, epochs=EPOCHS)
for r in rows:
    print(f"beta {r['beta']:<5}  distinct {r['distinct_paths']:4d}  train IoU {r['train_iou']:.3f}")
print("spearman", spearmanr(BETAS, [r["distinct_paths"] for r in rows]).correlation)
