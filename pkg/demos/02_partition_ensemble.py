"""Train the partition ensemble and watch it vote.

Holds two classes out of training entirely, trains the ensemble on the
rest, and compares vote counts on held-out-class sets against known-class
test sets. The vote count is the novelty score: 0..L.
"""

import numpy as np

from noveltydetect import (
    SplitSpec,
    SynthSpec,
    TrainConfig,
    ensemble_novelty_score,
    generate_synthetic,
    score_sets,
    split_per_class,
    train_ensemble,
)

ds = generate_synthetic(
    SynthSpec(num_classes=10, dim=8, examples_per_class=60, center_spread=1.0, within_std=0.6, seed=42)
)
novel_labels = {"c08", "c09"}
known = ds.restrict_to_classes(set(ds.class_index) - novel_labels)
novel = ds.restrict_to_classes(novel_labels)
multiclass_train, binary_train, test = split_per_class(known, SplitSpec(0.6, 0.15, seed=3))

ensemble = train_ensemble(
    multiclass_train,
    binary_train,
    num_partitions=8,
    novel_fraction=0.125,
    set_size=1,
    cfg=TrainConfig(l2_penalty=0.1, max_epochs=150),
    svm_c=100.0,
    seed=5,
    global_cfg=TrainConfig(learning_rate=2.0, l2_penalty=0.0, max_epochs=600, tolerance=1e-10),
)
print(f"ensemble of {ensemble.num_classifiers} binary classifiers over {known.num_classes} classes")
print("(8 known classes admit 8 distinct single-novel-class partitions)")
for clf in ensemble.classifiers[:3]:
    names = sorted(known.classes()[i] for i in clf.partition.presumed_novel)
    print(f"  partition {clf.partition.index}: presumed novel {names}, separator w={clf.w.round(2)}")

known_votes = score_sets(ensemble, [test.features[i : i + 1] for i in range(0, test.n, 4)])
novel_votes = score_sets(ensemble, [novel.features[i : i + 1] for i in range(0, novel.n, 2)])
print(f"\nmean votes on known-class points: {known_votes.mean():.2f}")
print(f"mean votes on novel-class points: {novel_votes.mean():.2f}")

hist_known = np.bincount(known_votes.astype(int), minlength=9)
hist_novel = np.bincount(novel_votes.astype(int), minlength=9)
print("\nvotes  known  novel")
for v in range(9):
    print(f"{v:5d}  {hist_known[v]:5d}  {hist_novel[v]:5d}")

one_set = novel.features[:5]
print(f"\na 5-point set from a held-out class scores {ensemble_novelty_score(ensemble, one_set)} votes")
