#!/usr/bin/env python3
"""Convert a torchvision ResNet-50 checkpoint to the RNW1 weight file read by
`cxr extract`, folding every batch norm into a per-channel scale and shift.

    convert_torchvision.py out.rnw                  # ImageNet weights (downloads)
    convert_torchvision.py out.rnw --state-dict sd.pth
    convert_torchvision.py --check path/to/cxr      # compare against torch

`--check` builds a randomly initialised network with non-trivial batch-norm
statistics, converts it, runs `cxr extract` on a few 224x224 grayscale
images and compares the features with torchvision's forward pass.
"""

import argparse
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import torch
import torchvision


def fold(sd, bn, eps):
    gamma, beta = sd[f"{bn}.weight"], sd[f"{bn}.bias"]
    mean, var = sd[f"{bn}.running_mean"], sd[f"{bn}.running_var"]
    scale = gamma / torch.sqrt(var + eps)
    return scale, beta - mean * scale


def rnw_tensors(sd, eps=1e-5):
    out = []

    def conv_bn(dst_conv, dst_bn, src_conv, src_bn):
        scale, shift = fold(sd, src_bn, eps)
        out.append((f"{dst_conv}.weight", sd[f"{src_conv}.weight"]))
        out.append((f"{dst_bn}.scale", scale))
        out.append((f"{dst_bn}.shift", shift))

    conv_bn("stem.conv", "stem.bn", "conv1", "bn1")
    for s, blocks in enumerate([3, 4, 6, 3], start=1):
        for b in range(blocks):
            src, dst = f"layer{s}.{b}", f"stage{s}.block{b}"
            for i in (1, 2, 3):
                conv_bn(f"{dst}.conv{i}", f"{dst}.bn{i}", f"{src}.conv{i}", f"{src}.bn{i}")
            if b == 0:
                conv_bn(f"{dst}.downsample.conv", f"{dst}.downsample.bn",
                        f"{src}.downsample.0", f"{src}.downsample.1")
    out.append(("fc.weight", sd["fc.weight"]))
    out.append(("fc.bias", sd["fc.bias"]))
    return out


def write_rnw(path, tensors):
    with open(path, "wb") as f:
        f.write(b"RNW1")
        f.write(struct.pack("<I", len(tensors)))
        for name, t in tensors:
            a = t.detach().to(torch.float32).contiguous().numpy()
            raw = name.encode("ascii")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", a.ndim))
            f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(a.astype("<f4").tobytes())


def write_pgm(path, pixels):
    h, w = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(pixels.astype(np.uint8).tobytes())


def check(cxr, n_images=3):
    torch.manual_seed(0)
    model = torchvision.models.resnet50(weights=None)
    # Fresh batch norms are the identity; give them real statistics.
    for m in model.modules():
        if isinstance(m, torch.nn.BatchNorm2d):
            m.weight.data.uniform_(0.5, 1.5)
            m.bias.data.uniform_(-0.2, 0.2)
            m.running_mean.uniform_(-0.2, 0.2)
            m.running_var.uniform_(0.5, 2.0)
    model.eval()

    rng = np.random.default_rng(0)
    mean = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
    std = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        write_rnw(tmp / "w.rnw", rnw_tensors(model.state_dict()))
        batch = []
        rows = ["path,label"]
        for i in range(n_images):
            # Smooth gradients plus noise, the kind of range a radiograph has.
            yy, xx = np.mgrid[0:224, 0:224]
            img = 128 + 60 * np.sin(xx / (17 + i)) * np.cos(yy / 23) + rng.normal(0, 20, (224, 224))
            img = np.clip(img, 0, 255).round()
            write_pgm(tmp / f"img{i}.pgm", img)
            rows.append(f"img{i}.pgm,Normal")
            x = torch.tensor(img, dtype=torch.float32).div(255).expand(3, 224, 224)
            batch.append((x - mean) / std)
        (tmp / "manifest.csv").write_text("\n".join(rows) + "\n")
        with torch.no_grad():
            expected = model(torch.stack(batch)).numpy().astype(np.float64)

        subprocess.run([cxr, "extract", "--manifest", str(tmp / "manifest.csv"),
                        "--weights", str(tmp / "w.rnw"), "--features", str(tmp / "f.csv")],
                       check=True)
        got = np.loadtxt(tmp / "f.csv", delimiter=",", skiprows=1,
                         usecols=range(2, 1002), ndmin=2)

    err = np.abs(got - expected)
    rel = err.max() / np.abs(expected).max()
    print(f"{n_images} images: max |diff| {err.max():.3e}, "
          f"max |logit| {np.abs(expected).max():.3f}, relative {rel:.3e}")
    return rel < 1e-4


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("out", nargs="?", type=Path, help="RNW1 file to write")
    p.add_argument("--state-dict", type=Path, help="torchvision resnet50 state_dict (.pth)")
    p.add_argument("--check", metavar="CXR", help="path to the cxr binary; run the torch comparison")
    args = p.parse_args()

    if args.check:
        sys.exit(0 if check(args.check) else 1)
    if args.out is None:
        p.error("an output path is required")
    if args.state_dict:
        sd = torch.load(args.state_dict, map_location="cpu", weights_only=True)
    else:
        w = torchvision.models.ResNet50_Weights.IMAGENET1K_V1
        sd = torchvision.models.resnet50(weights=w).state_dict()
    tensors = rnw_tensors(sd)
    write_rnw(args.out, tensors)
    print(f"wrote {len(tensors)} tensors, {sum(t.numel() for _, t in tensors)} parameters to {args.out}")


if __name__ == "__main__":
    main()
