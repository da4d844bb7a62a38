# Tours on 14 cities whose edge costs depend on 3 hidden features per sample.
# How often does each model give back exactly the observed tour?

import os
import time

from iolvm import evaluation, metrics, pipeline
from iolvm.model import fit

EPOCHS = int(os.environ.get("EPOCHS", 20))

cfg = pipeline.load_config("burma14_h3")
train, test = pipeline.split(cfg, pipeline.generate_dataset(cfg))
print(len(train), "/", len(test), "tours,", metrics.distinct_path_count(train.X), "distinct in train")

rows = {"euclidean": evaluation.euclidean_metrics(test)["euclidean_full_match"]}
for kind, k in (("iolvm", 10), ("iolvm", 2), ("vae", 2)):
    t = time.time()
    tcfg = pipeline.train_config(cfg, kind, epochs=EPOCHS)
    m = pipeline.build_model(cfg, train.graph, kind, k, seed=tcfg.seed)
    fit(m, train, tcfg)
    _, rec = evaluation.reconstruction_metrics(m, test)
    rows[f"{kind} k={k}"] = rec["full_match"]
    print(f"{kind} k={k}: {rec}  ({time.time() - t:.0f}s)")

for name, v in rows.items():
    print(f"{name:12s} {100 * v:5.1f}%")

# %% the 29-city, 50-feature variant: the VAE rarely produces a tour at all
cfg = pipeline.load_config("bayg29_h50")
train, test = pipeline.split(cfg, pipeline.generate_dataset(cfg))
vae = pipeline.build_model(cfg, train.graph, "vae", 2)
fit(vae, train, pipeline.train_config(cfg, "vae", epochs=EPOCHS))
print("bayg29_h50 vae", evaluation.reconstruction_metrics(vae, test)[1])
