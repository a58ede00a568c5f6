#!/usr/bin/env python3
"""Generate the square-with-circular-hole mesh fixture.

Transfinite ring between the circle of radius R around (0.5, 0.5) and the
unit-square boundary: m angular spokes theta_k = 2*pi*k/m, layers radial
points per spoke interpolated between the circle and the square.  With m
divisible by 4 the spokes hit the four side midpoints exactly, so the
observation point (0, 0.5) is a mesh node; with m divisible by 8 the square
corners are hit exactly as well.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from fracorder.meshes import BOTTOM, LEFT, OBSTACLE, RIGHT, TOP, Mesh, save_mesh


def build(m: int, layers: int, radius: float) -> Mesh:
    if m % 8 != 0:
        raise ValueError("m must be divisible by 8 to hit corners and midpoints")
    theta = 2 * math.pi * np.arange(m) / m
    c, s = np.cos(theta), np.sin(theta)
    r_square = 0.5 / np.maximum(np.abs(c), np.abs(s))
    frac = np.arange(layers + 1) / layers
    r = radius + np.outer(frac, r_square - radius)  # (layers+1, m)
    x = 0.5 + r * c
    y = 0.5 + r * s
    nodes = np.column_stack([x.ravel(), y.ravel()])

    def nid(i, k):
        return i * m + k % m

    elements = []
    for i in range(layers):
        for k in range(m):
            a, b = nid(i, k), nid(i + 1, k)
            cc, d = nid(i + 1, k + 1), nid(i, k + 1)
            elements.append((a, b, cc))
            elements.append((a, cc, d))
    elements = np.array(elements)

    boundary = []
    markers = []
    for k in range(m):
        boundary.append(nid(0, k))
        markers.append(OBSTACLE)
    for k in range(m):
        j = nid(layers, k)
        px, py = nodes[j]
        if py <= 1e-12:
            markers.append(BOTTOM)
        elif py >= 1 - 1e-12:
            markers.append(TOP)
        elif px <= 1e-12:
            markers.append(LEFT)
        else:
            markers.append(RIGHT)
        boundary.append(j)
    return Mesh(2, nodes, elements, np.array(boundary), np.array(markers))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--spokes", type=int, default=80)
    parser.add_argument("--layers", type=int, default=13)
    parser.add_argument("--radius", type=float, default=0.2)
    parser.add_argument("--out", type=Path,
                        default=Path(__file__).resolve().parents[1]
                        / "src" / "fracorder" / "data" / "square_hole.txt")
    args = parser.parse_args()
    mesh = build(args.spokes, args.layers, args.radius)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, args.out)
    print(f"{args.out}: {len(mesh.nodes)} nodes, {len(mesh.elements)} triangles, "
          f"{len(mesh.boundary_nodes)} boundary nodes")


if __name__ == "__main__":
    main()
