"""
A small scenario run
====================

Simulates a seeded 1 % sample of scenario 1, selects C and g on a held-out
slice of the training rows and reports the confusion matrix of the OAA model.
"""

# %%
from faultzone import pipeline as pl

cfg = pl.load_config(overrides={"grid": {"C": [10, 100, 1000], "g": [0.03, 0.3, 3]}})
manifest = pl.make_manifest(cfg, scenario=1, subsample_fraction=0.01, seed=1)
print(len(manifest.case_ids), "cases")

# %%
result = pl.run_scenario(manifest, cfg, splits=("augmented",), strategies=(("oaa", None),))
sel = result.selections["augmented", "oaa", None]
print("chosen C, g:", sel.grid.best)

# %%
print(result.reports["augmented", "oaa", None].to_text())
