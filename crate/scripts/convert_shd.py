#!/usr/bin/env python3
"""Convert SHD/SSC HDF5 files into per-sample event files plus a JSON manifest.

    python scripts/convert_shd.py shd_train.h5 out/ --split train
    python scripts/convert_shd.py shd_test.h5 out/ --split test

Writes out/<split>.json and out/<split>/NNNNNN.snne. Requires h5py and numpy.
"""

import argparse
import json
import math
import struct
from pathlib import Path

import h5py
import numpy as np

MAGIC = b"SNNE"
VERSION = 1


def encode(times_ms, units, label, duration_ms):
    order = np.lexsort((units, times_ms))
    times_ms, units = times_ms[order], units[order]
    head = MAGIC + struct.pack("<HHfI", VERSION, label, duration_ms, len(times_ms))
    body = np.empty(len(times_ms), dtype=[("t", "<f4"), ("u", "<u2")])
    body["t"], body["u"] = times_ms, units
    return head + body.tobytes()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("h5", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--split", required=True)
    ap.add_argument("--name", default="shd")
    ap.add_argument("--channels", type=int, default=700)
    ap.add_argument("--classes", type=int, default=None, help="defaults to max label + 1")
    ap.add_argument("--duration-ms", type=float, default=None,
                    help="fixed sample length; defaults to the last event of each sample")
    args = ap.parse_args()

    sample_dir = args.out / args.split
    sample_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    with h5py.File(args.h5, "r") as f:
        times, units, labels = f["spikes"]["times"], f["spikes"]["units"], np.asarray(f["labels"])
        for k in range(len(labels)):
            t_ms = np.asarray(times[k], dtype=np.float64) * 1000.0
            u = np.asarray(units[k], dtype=np.uint16)
            if len(u) and int(u.max()) >= args.channels:
                raise SystemExit(f"sample {k}: unit {int(u.max())} >= {args.channels} channels")
            if args.duration_ms is not None:
                keep = t_ms < args.duration_ms
                t_ms, u = t_ms[keep], u[keep]
                duration = args.duration_ms
            else:
                duration = math.ceil(t_ms.max()) + 1.0 if len(t_ms) else 0.0
            label = int(labels[k])
            rel = f"{args.split}/{k:06d}.snne"
            (args.out / rel).write_bytes(encode(t_ms.astype(np.float32), u, label, duration))
            entries.append({"file": rel, "label": label})

    n_classes = args.classes or (max(e["label"] for e in entries) + 1 if entries else 0)
    manifest = {
        "name": args.name,
        "split": args.split,
        "n_classes": n_classes,
        "n_channels": args.channels,
        "samples": entries,
    }
    (args.out / f"{args.split}.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {len(entries)} samples to {args.out / (args.split + '.json')}")


if __name__ == "__main__":
    main()
