#!/usr/bin/env python3
"""The full learning pipeline: prepare, train, test, inspect.

Builds a training ground truth, grid-searches a decision tree over its
feature matrix, evaluates on a fresh balanced dataset, and ranks the
features by importance. Ends by converting the training set to its
fileless form, which keeps vectors and metadata but drops the binaries.
"""

import shutil
from pathlib import Path

from packlab.config import PACKERS_FILE, conf_path
from packlab.dataset import Dataset
from packlab.model import dump, rank_features, test as model_test, train
from packlab.pack import load_packers

OUT = Path("demo-output")
OUT.mkdir(exist_ok=True)
for sub in ("train-ds", "test-ds"):
    if (OUT / sub).exists():
        shutil.rmtree(OUT / sub)

packers = load_packers(conf_path(PACKERS_FILE))
chosen = [packers["zipper"], packers["xorcoder"]]

# PREPARE: balanced training set, then an independent balanced test set
train_ds = Dataset.create(OUT / "train-ds", name="demo-train")
train_ds.make(160, format="PE", packers=chosen, seed=1)
test_ds = Dataset.create(OUT / "test-ds", name="demo-test")
test_ds.make(60, format="PE", packers=chosen, seed=2)

# TRAIN: null-variance features dropped, stratified 80/20 holdout,
# hyperparameters grid-searched by cross-validated accuracy
model = train(train_ds, "dt", seed=0)
print(f"Name: {model.name}")
print(f"chosen hyperparameters: {model.hyperparams}")
header = ("", *model.metrics["train"].HEADER)
print("        " + "  ".join(h.ljust(9) for h in model.metrics["train"].HEADER))
print("Train   " + "  ".join(c.ljust(9) for c in model.metrics["train"].cells()))
print("Test    " + "  ".join(c.ljust(9) for c in model.metrics["test"].cells()))

# TEST on the fresh dataset
record = model_test(model, test_ds)
print(f"\nTest results for: {test_ds.name}")
print("        " + "  ".join(c.ljust(9) for c in record.cells()))

print("\nFeature importance (gini decrease):")
for name, importance in rank_features(model):
    if importance > 0:
        print(f"  {importance:8.4f}  {name}")

path = dump(model, OUT / f"{model.name}.json")
print(f"\nwrote {path}")

fileless = train_ds.to_fileless()
frame = fileless.feature_frame()
print(f"converted {fileless.name} to fileless: "
      f"{frame.values.shape[0]} samples x {frame.values.shape[1]} features")
