"""Draw DET curves comparing the supervised baseline with a tri-training
ensemble on one benchmark event.

A DET curve plots false-negative rate against false-positive rate across all
decision thresholds; the equal error rate is where the curve crosses the
diagonal. Writes det_curves.png next to this script.

Run:  python3 demos/det_curves.py [--seed 0] [--event far]
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from tridet import data, ensemble, learner, metrics, semisup

parser = argparse.ArgumentParser()
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--event", default="far",
                    help="which event's curve to draw (near, mid, far)")
args = parser.parse_args()
seed = args.seed

labeled, pool, _ = data.generate_synthetic(data.benchmark_config(seed=seed))
train_set, dev, test = data.split(labeled, (0.7, 0.1, 0.2), seed=seed)
event = args.event
if event not in test.class_names:
    raise SystemExit(f"unknown event {event!r}; choose from {test.class_names}")
col = test.class_names.index(event)

model_config = learner.ModelConfig(labeled.input_dim, (64,),
                                   labeled.num_classes, seed=seed)
train_params = learner.TrainParams(epochs=100, seed=seed)
weights = learner.compute_class_weights(train_set, "balanced")

sup = learner.train(learner.init_model(model_config), train_set, weights,
                    train_params)
result = semisup.tri_train(train_set, pool, semisup.TriTrainParams(
    model=model_config, train=train_params, k=200, t_iters=1,
    bootstrap_seeds=(seed + 1, seed + 2, seed + 3)))
ens = ensemble.Ensemble(tuple(result.all_models))

fig, ax = plt.subplots(figsize=(5.5, 5.5))
for name, predictor in (("supervised", sup), ("tri-training ensemble", ens)):
    scores = predictor.predict_proba(test.features)[:, col]
    curve = metrics.det_curve(scores, test.labels[:, col])
    auc = 100 * metrics.auc_det(curve)
    eer = 100 * metrics.eer(curve)
    ax.plot(curve.fpr, curve.fnr, drawstyle="steps-post",
            label=f"{name} (AUC {auc:.2f}%, EER {eer:.2f}%)")
    print(f"{name:24s} event={event}  AUC {auc:6.2f}%  EER {eer:6.2f}%")

ax.plot([0, 1], [0, 1], ":", color="gray", linewidth=1)  # EER diagonal
ax.set_xlabel("false positive rate")
ax.set_ylabel("false negative rate")
ax.set_xlim(0, 0.5)
ax.set_ylim(0, 0.5)
ax.set_title(f"DET curves, event '{event}' (seed {seed})")
ax.legend()
fig.tight_layout()

out = Path(__file__).resolve().parent / "det_curves.png"
fig.savefig(out, dpi=120)
print(f"wrote {out}")
