#!/usr/bin/env python3
"""Regenerates the bundled world files. Output is deterministic."""

import random
import sys
from pathlib import Path

RES = 0.05


def write(path, rows):
    with open(path, "w") as f:
        f.write(f"res {RES} origin 0 0\n")
        for row in rows:
            f.write("".join(row) + "\n")


def maze(n=5, free=10, wall=2, seed=7, loops=3):
    pitch = free + wall
    size = n * pitch + wall
    g = [["#"] * size for _ in range(size)]

    def carve(x0, y0, x1, y1):
        for y in range(y0, y1):
            for x in range(x0, x1):
                g[y][x] = "."

    for cy in range(n):
        for cx in range(n):
            x0, y0 = wall + cx * pitch, wall + cy * pitch
            carve(x0, y0, x0 + free, y0 + free)

    rng = random.Random(seed)
    seen = {(0, 0)}
    stack = [(0, 0)]
    edges = []
    while stack:
        cx, cy = stack[-1]
        options = [(cx + dx, cy + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                   if 0 <= cx + dx < n and 0 <= cy + dy < n and (cx + dx, cy + dy) not in seen]
        if not options:
            stack.pop()
            continue
        nxt = rng.choice(options)
        seen.add(nxt)
        edges.append(((cx, cy), nxt))
        stack.append(nxt)

    walls = [((cx, cy), (cx + 1, cy)) for cy in range(n) for cx in range(n - 1)]
    walls += [((cx, cy), (cx, cy + 1)) for cy in range(n - 1) for cx in range(n)]
    closed = [w for w in walls if w not in edges and (w[1], w[0]) not in edges]
    edges += rng.sample(closed, loops)

    for a, b in edges:
        (ax, ay), (bx, by) = sorted([a, b])
        x0, y0 = wall + ax * pitch, wall + ay * pitch
        if bx != ax:
            carve(x0 + free, y0, x0 + free + wall, y0 + free)
        else:
            carve(x0, y0 + free, x0 + free, y0 + free + wall)
    return g


def room(size=30):
    g = [["#"] * size for _ in range(size)]
    for y in range(1, size - 1):
        for x in range(1, size - 1):
            g[y][x] = "."
    return g


def sealed_pocket(size=40):
    g = room(size)
    # a closed 2-cell-thick box with free space inside; the gaps around it
    # are wide enough for the planner's clearance
    for y in range(20, 32):
        for x in range(16, 28):
            edge = y < 22 or y >= 30 or x < 18 or x >= 26
            g[y][x] = "#" if edge else "."
    return g


def u_shape(size=40):
    g = room(size)
    for y in range(10, 30):
        for x in range(18, 21):
            g[y][x] = "#"
    for x in range(10, 21):
        for y in range(10, 13):
            g[y][x] = "#"
        for y in range(27, 30):
            g[y][x] = "#"
    return g


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "worlds"
    out.mkdir(parents=True, exist_ok=True)
    # rows are written top first; flip so the generator's y axis points up
    for name, grid in (("maze.txt", maze()), ("room.txt", room()),
                       ("sealed_pocket.txt", sealed_pocket()), ("u_shape.txt", u_shape())):
        write(out / name, grid[::-1])


if __name__ == "__main__":
    main()
