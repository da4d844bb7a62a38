# Many source/target pairs, three agent types.  Does the 2-d latent space
# sort paths by agent without ever seeing the labels?  A VAE that models
# edge bits directly is trained on the same data for comparison.

import os

import numpy as np

from iolvm import evaluation, metrics, pipeline
from iolvm.model import fit

EPOCHS = int(os.environ.get("EPOCHS", 30))

cfg = pipeline.load_config("waxman_multi")
train, test = pipeline.split(cfg, pipeline.generate_dataset(cfg))
labels = np.array(train.meta_column("agent"))
print(train.graph, "|", len(train), "training paths,", len({(p.source, p.target) for p in train.requirements}), "pairs")

# %%
models = {}
for kind in ("iolvm", "vae"):
    tcfg = pipeline.train_config(cfg, kind, epochs=EPOCHS)
    models[kind] = pipeline.build_model(cfg, train.graph, kind, seed=tcfg.seed)
    fit(models[kind], train, tcfg)

# %% k-means with 3 clusters on the posterior means
for kind, m in models.items():
    mu = evaluation.latent_means(m, train)
    print(kind, "purity", round(metrics.cluster_purity(mu, labels, 3), 3))
    for a in range(3):
        print("   agent", a, "mean latent", mu[labels == a].mean(0).round(2))

# %% the VAE decodes edge bits, so its outputs need not be paths
for kind, m in models.items():
    print(kind, evaluation.reconstruction_metrics(m, test)[1])
