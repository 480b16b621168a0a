"""Build the 6,000/1,000 MNIST subset in IDX format.

Source: the `mnist` npm package (10,000 MNIST digits stored as JSON, pixels
normalized to [0, 1] with three decimals). Fetch it with `npm pack mnist`,
unpack, and point --digits at package/src/digits.
"""
import argparse
import json
import os
import random
import struct
import tarfile


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--digits", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--train", type=int, default=6000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20230601)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        with open(os.path.join(args.digits, f"{digit}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % 784 == 0
        for i in range(len(flat) // 784):
            px = [min(255, max(0, round(v * 255))) for v in flat[i * 784:(i + 1) * 784]]
            samples.append((px, digit))

    random.Random(args.seed).shuffle(samples)
    train = samples[:args.train]
    test = samples[args.train:args.train + args.test]

    stage = os.path.join(os.path.dirname(args.out) or ".", "mnist-subset")
    os.makedirs(stage, exist_ok=True)
    names = {
        "train-images-idx3-ubyte": lambda p: write_idx_images(p, [s[0] for s in train]),
        "train-labels-idx1-ubyte": lambda p: write_idx_labels(p, [s[1] for s in train]),
        "t10k-images-idx3-ubyte": lambda p: write_idx_images(p, [s[0] for s in test]),
        "t10k-labels-idx1-ubyte": lambda p: write_idx_labels(p, [s[1] for s in test]),
    }
    for name, writer in names.items():
        writer(os.path.join(stage, name))
    with tarfile.open(args.out, "w:gz") as tar:
        for name in names:
            info = tar.gettarinfo(os.path.join(stage, name), arcname=f"mnist-subset/{name}")
            info.mtime = 0
            info.uid = info.gid = 0
            info.uname = info.gname = ""
            with open(os.path.join(stage, name), "rb") as fh:
                tar.addfile(info, fh)


if __name__ == "__main__":
    main()
