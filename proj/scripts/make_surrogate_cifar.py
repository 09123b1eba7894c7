#!/usr/bin/env python3
"""Write a CIFAR-10-format binary dataset built from photographs bundled with
scikit-image and scikit-learn.

Each of the 10 classes is one source photograph; samples are random square crops
of random scale, resized to 32x32, randomly mirrored and photometrically jittered
(channel order, saturation, contrast, brightness). The output directory gets
data_batch_1..5.bin, test_batch.bin and batches.meta.txt, the layout of the
CIFAR-10 binary release (1 label byte + 3072 pixel bytes, planar RGB).
"""

import argparse
import os
import sys

import numpy as np
from PIL import Image

CLASSES = [
    "china", "flower", "astronaut", "coffee", "chelsea",
    "rocket", "immunohistochemistry", "hubble", "retina", "coins",
]


def load_sources():
    import skimage.data as sk
    from sklearn.datasets import load_sample_images

    samples = load_sample_images().images
    imgs = {
        "china": samples[0],
        "flower": samples[1],
        "astronaut": sk.astronaut(),
        "coffee": sk.coffee(),
        "chelsea": sk.chelsea(),
        "rocket": sk.rocket(),
        "immunohistochemistry": sk.immunohistochemistry(),
        "hubble": sk.hubble_deep_field(),
        "retina": sk.retina(),
        "coins": np.stack([sk.coins()] * 3, axis=-1),
    }
    return [np.asarray(imgs[name], dtype=np.uint8)[..., :3] for name in CLASSES]


def crop(rng, img):
    h, w, _ = img.shape
    for _ in range(100):
        size = int(rng.integers(32, max(33, min(h, w) // 2)))
        y = int(rng.integers(0, h - size + 1))
        x = int(rng.integers(0, w - size + 1))
        patch = img[y:y + size, x:x + size]
        if patch.std() >= 8.0:  # skip flat regions such as the black border of the retina image
            break
    out = np.asarray(Image.fromarray(patch).resize((32, 32), Image.BOX))
    if rng.random() < 0.5:
        out = out[:, ::-1]
    return jitter(rng, out)


def jitter(rng, patch):
    """Photometric jitter so that global colour and brightness alone do not identify the class."""
    x = patch.astype(np.float64)
    x = x[..., rng.permutation(3)]
    grey = x.mean(axis=-1, keepdims=True)
    x = grey + rng.uniform(0.0, 1.0) * (x - grey)
    mean = x.mean()
    x = (x - mean) * rng.uniform(0.6, 1.4) + rng.uniform(70.0, 180.0)
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def records(rng, sources, per_class):
    labels = np.tile(np.arange(len(sources), dtype=np.uint8), per_class)
    rng.shuffle(labels)
    rows = np.empty((labels.size, 3073), dtype=np.uint8)
    for i, k in enumerate(labels):
        rows[i, 0] = k
        rows[i, 1:] = crop(rng, sources[k]).transpose(2, 0, 1).reshape(-1)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--train-per-class", type=int, default=600)
    ap.add_argument("--test-per-class", type=int, default=300)
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    if args.train_per_class % 5:
        sys.exit("--train-per-class must be a multiple of 5 (one share per data batch)")

    os.makedirs(args.out, exist_ok=True)
    marker = os.path.join(args.out, "surrogate.txt")
    stamp = f"train_per_class={args.train_per_class} test_per_class={args.test_per_class} seed={args.seed}\n"
    if os.path.exists(marker) and open(marker).read() == stamp:
        print("surrogate data up to date:", args.out)
        return

    rng = np.random.default_rng(args.seed)
    sources = load_sources()
    for b in range(1, 6):
        records(rng, sources, args.train_per_class // 5).tofile(os.path.join(args.out, f"data_batch_{b}.bin"))
    records(rng, sources, args.test_per_class).tofile(os.path.join(args.out, "test_batch.bin"))
    with open(os.path.join(args.out, "batches.meta.txt"), "w") as f:
        f.write("\n".join(CLASSES) + "\n")
    with open(marker, "w") as f:
        f.write(stamp)
    print("wrote surrogate CIFAR-10 data to", args.out)


if __name__ == "__main__":
    main()
