#!/usr/bin/env python3
"""Convert the original Cornell grasping dataset into the layout read by openarms.

For every pcdNNNN.txt point cloud found under SRC this writes DST/pcdNNNNd.pgm
(16-bit depth, 0.1 mm units, 0 = missing) and copies the cpos/cneg rectangle
files. Depth is the distance of each point from the camera, placed at the
pixel given by the point's index column.

    python3 scripts/cornell_pcd_to_pgm.py <cornell-root> <out-dir> [--objects z.txt]

--objects takes a whitespace-separated file whose first two columns are the
image number and the object id (the dataset's background mapping file). Without
it every scene is treated as its own object.
"""

import argparse
import re
import shutil
import sys
from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 640, 480
UNIT_MM = 0.1


def read_pcd_depth(path):
    depth = np.zeros((HEIGHT, WIDTH), dtype=np.float64)
    with open(path) as f:
        for line in f:
            parts = line.split()
            if len(parts) != 5:
                continue
            try:
                x, y, z = (float(v) for v in parts[:3])
                index = int(parts[4])
            except ValueError:
                continue
            r, c = divmod(index, WIDTH)
            if 0 <= r < HEIGHT:
                depth[r, c] = np.sqrt(x * x + y * y + z * z)
    return depth


def write_pgm(path, depth_mm):
    units = np.clip(np.round(depth_mm / UNIT_MM), 0, 65535).astype(">u2")
    h, w = units.shape
    with open(path, "wb") as f:
        f.write(f"P5\n# depth_unit_mm {UNIT_MM}\n{w} {h}\n65535\n".encode())
        f.write(units.tobytes())


def load_objects(path):
    objects = {}
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[0].isdigit():
            objects[int(parts[0])] = parts[1]
    return objects


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=Path)
    ap.add_argument("dst", type=Path)
    ap.add_argument("--objects", type=Path)
    args = ap.parse_args()

    clouds = sorted(p for p in args.src.rglob("pcd*.txt") if re.fullmatch(r"pcd\d+\.txt", p.name))
    if not clouds:
        sys.exit(f"no pcdNNNN.txt files under {args.src}")
    objects = load_objects(args.objects) if args.objects else {}
    args.dst.mkdir(parents=True, exist_ok=True)

    rows = []
    for cloud in clouds:
        scene = cloud.stem
        write_pgm(args.dst / f"{scene}d.pgm", read_pcd_depth(cloud))
        for kind in ("cpos", "cneg"):
            rects = cloud.with_name(f"{scene}{kind}.txt")
            if rects.exists():
                shutil.copyfile(rects, args.dst / rects.name)
            else:
                (args.dst / rects.name).write_text("")
        number = int(scene[3:])
        rows.append(f"{scene},{objects.get(number, scene)}")

    (args.dst / "objects.csv").write_text("scene_id,object_id\n" + "\n".join(rows) + "\n")
    print(f"converted {len(clouds)} scenes into {args.dst}")


if __name__ == "__main__":
    main()
