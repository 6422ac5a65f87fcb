"""Train a miniature editor end to end and watch the losses move.

Uses a deliberately small model and budget so the script finishes in about
a minute on a laptop CPU; the point is the mechanics, not the quality. The
run directory it leaves behind (checkpoint plus JSON-lines loss log) is
what the other demos consume.

Run:  python demos/02_training_walkthrough.py
"""

from pathlib import Path

import numpy as np

from attredit import (
    SyntheticSpec,
    TrainConfig,
    compact_config,
    dataset_from_synthetic,
    generate_synthetic_dataset,
    split_dataset,
)
from attredit.training import save_model_checkpoint, train_loop

OUT = Path(__file__).parent / "output" / "mini_run"

dataset = dataset_from_synthetic(
    generate_synthetic_dataset(SyntheticSpec(size=1500, resolution=32), seed=11)
)
splits = split_dataset(dataset, seed=0)
print(f"training on {len(splits['train'])} images")

# Five critic updates per generator update; 600 total optimizer updates is
# 100 generator steps. The reconstruction term dominates early and falls
# fast; the adversarial pair hovers around zero by design.
arch = compact_config(32, 4, base=16)
config = TrainConfig(max_steps=600, batch_size=32, seed=0, checkpoint_every=0)
state = train_loop(config, splits["train"], arch, out_dir=OUT)

g_reports = [r for _, phase, r in state.reports if phase == "g"]
for slice_name, chunk in [("first 10", g_reports[:10]), ("last 10", g_reports[-10:])]:
    rec = np.mean([r.rec for r in chunk])
    cls_g = np.mean([r.cls_g for r in chunk])
    adv_g = np.mean([r.adv_g for r in chunk])
    print(f"{slice_name:>9} generator steps: rec={rec:.4f} cls_g={cls_g:.4f} adv_g={adv_g:+.3f}")

path = save_model_checkpoint(state, OUT / "model.ckpt")
print(f"checkpoint: {path}")
print(f"loss log:   {OUT / 'losses.jsonl'}")
