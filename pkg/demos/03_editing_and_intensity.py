"""Edit held-out faces with a trained checkpoint and sweep edit intensity.

Loads the checkpoint written by demo 02 (run that first), flips each
attribute on a few test faces, and renders an intensity strip: the same
face decoded at attribute values 0.0 .. 1.0. Because the model trains on
binary labels only, the smooth in-between frames come for free from the
conditioning pathway.

Run:  python demos/03_editing_and_intensity.py
"""

from pathlib import Path

import numpy as np
from PIL import Image

from attredit import (
    SyntheticSpec,
    dataset_from_synthetic,
    generate_synthetic_dataset,
    model_editor,
    probe_judge,
    split_dataset,
)
from attredit.evaluation import evaluate_editor, intensity_sweep
from attredit.training import model_from_checkpoint

HERE = Path(__file__).parent
CKPT = HERE / "output" / "mini_run" / "model.ckpt"
OUT = HERE / "output"
if not CKPT.exists():
    raise SystemExit("run demos/02_training_walkthrough.py first")


def to_u8(image):
    return np.clip((image + 1.0) * 127.5, 0, 255).round().astype(np.uint8)


def strip(images, scale=3):
    row = np.concatenate([to_u8(img) for img in images], axis=1)
    img = Image.fromarray(row, "RGB")
    return img.resize((img.width * scale, img.height * scale), Image.NEAREST)


model = model_from_checkpoint(CKPT)
dataset = dataset_from_synthetic(
    generate_synthetic_dataset(SyntheticSpec(size=1500, resolution=32), seed=11)
)
test = split_dataset(dataset, seed=0)["test"]
editor = model_editor(model)
judge = probe_judge(test.names)

# quick scorecard against the exact probe (a real evaluation would use an
# independently trained judge; see the evaluate CLI subcommand)
report = evaluate_editor(editor, test.subset(range(64)), judge)
print(report.to_text_table())

# flip each attribute on one face
source = test.images[0]
labels = test.labels[0]
edits = [source]
for i in range(len(test.names)):
    target = labels.copy()
    target[i] = 1.0 - target[i]
    edits.append(editor(source[None], target[None])[0])
strip(edits).save(OUT / "edits.png")
print(f"wrote {OUT / 'edits.png'} (source, then one flip per attribute)")

# intensity strip for the first attribute
points = intensity_sweep(editor, source, labels, 0, steps=7, judge=judge)
strip([p.image for p in points]).save(OUT / "intensity_strip.png")
print(
    f"wrote {OUT / 'intensity_strip.png'}; judge probability per stop: "
    + " ".join(f"{p.probability:.2f}" for p in points)
)
