#!/usr/bin/env python3
"""Writes fourroom.json and sixcorridor.json.

Both worlds are built from axis-aligned boxes. Roadmap nodes are grid points
that keep a clearance margin from every box and from the bounds. The
sixcorridor layout is generated from one half and its 180 degree rotation so
the corridor symmetry is exact.
"""

import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent


def box(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def box_distance(b, x, y):
    (x0, y0), _, (x1, y1), _ = b
    dx = max(x0 - x, 0.0, x - x1)
    dy = max(y0 - y, 0.0, y - y1)
    return math.hypot(dx, dy)


def clear(boxes, bounds, x, y, margin):
    xmin, ymin, xmax, ymax = bounds
    if x - margin < xmin or x + margin > xmax or y - margin < ymin or y + margin > ymax:
        return False
    return all(box_distance(b, x, y) > margin for b in boxes)


def grid_nodes(boxes, bounds, spacing, margin, offset=0.5):
    xmin, ymin, xmax, ymax = bounds
    nodes = []
    y = ymin + offset
    while y < ymax:
        x = xmin + offset
        while x < xmax:
            if clear(boxes, bounds, x, y, margin):
                nodes.append([round(x, 3), round(y, 3), 0.0])
            x += spacing
        y += spacing
    return nodes


def scenario(name, note, bounds, boxes, landmarks, nodes, start, goal, kidnap, planner,
             robot_radius=0.2, sensor=None):
    xmin, ymin, xmax, ymax = bounds
    return {
        "name": name,
        "note": note,
        "bounds": {"xmin": xmin, "ymin": ymin, "xmax": xmax, "ymax": ymax},
        "robot_radius": robot_radius,
        "obstacles": boxes,
        "landmarks": [{"id": i, "x": round(x, 4), "y": round(y, 4)} for i, x, y in landmarks],
        "sensor": sensor or {"r_sensor": 4.0, "eta_r": 0.08, "eta_theta": 0.02,
                             "sigma_b_r": 0.05, "sigma_b_theta": 0.005, "occlusion": True},
        "process_noise": {"sigma_v": 0.01, "sigma_omega": 0.01},
        "roadmap_nodes": nodes,
        "start": start,
        "goal": goal,
        "kidnap": kidnap,
        "planner": planner,
    }


def fourroom():
    bounds = (0.0, 0.0, 25.0, 12.0)
    boxes = []
    for k in range(5):
        boxes.append(box(6.0 * k, 0.0, 6.0 * k + 1.0, 7.2))
    for k in range(4):
        ox = 1.0 + 6.0 * k
        boxes.append(box(ox, 7.0, ox + 2.0, 7.2))
        boxes.append(box(ox + 3.2, 7.0, ox + 5.0, 7.2))
    room_layout = [(1, 0.3, 0.3), (2, 4.7, 1.5), (3, 0.3, 4.0), (4, 4.7, 5.5), (5, 2.0, 6.7)]
    landmarks = []
    for k in range(4):
        ox = 1.0 + 6.0 * k
        landmarks += [(i, ox + x, y) for i, x, y in room_layout]
    for k in range(4):
        landmarks.append((20 + k, 3.6 + 6.0 * k, 11.0))
    nodes = grid_nodes(boxes, bounds, 1.0, 0.35)
    return scenario(
        "fourroom",
        "Four identical rooms below a shared hallway. Room beacons repeat ids 1-5; "
        "each hallway beacon (ids 20-23) is unique. Coordinates are a reconstruction.",
        bounds, boxes, landmarks, nodes,
        start=[2.0, 9.5, 0.0], goal=[22.0, 9.5, 0.0],
        kidnap={"time_step": 40, "destination": [8.5, 2.0, math.pi / 2]},
        planner={"target_radius": 2.0, "initial_belief": {"samples": 1000},
                 "rrt": {"inflation": 0.15}})


def rotate(x, y, cx, cy):
    return 2.0 * cx - x, 2.0 * cy - y


def sixcorridor():
    width, height = 38.0, 24.0
    cx, cy = width / 2.0, height / 2.0
    bounds = (0.0, 0.0, width, height)
    half = 0.8
    centers = [5.0, 9.5, 14.0]  # C1, C2, C3; C4-C6 are their rotations
    west = [
        box(0.0, 0.0, centers[0] - half, 8.0),
        box(centers[0] + half, 0.0, centers[1] - half, 8.0),
        box(centers[1] + half, 0.0, centers[2] - half, 8.0),
        box(centers[2] + half, 0.0, 17.0, 8.0),
        box(0.0, 8.0, 2.0, 10.4),
        box(0.0, 10.4, 17.0, height),
        box(17.0, 0.0, 21.0, 8.0),
    ]
    boxes = list(west)
    for b in west:
        (x0, y0), _, (x1, y1), _ = b
        rx0, ry0 = rotate(x1, y1, cx, cy)
        rx1, ry1 = rotate(x0, y0, cx, cy)
        boxes.append(box(rx0, ry0, rx1, ry1))

    half_landmarks = []
    for c in centers:
        half_landmarks += [(1, c - 0.5, 0.3), (2, c + 0.5, 3.0), (5, c - 0.5, 5.0),
                           (6, c + 0.5, 6.8), (3, c, 10.1), (3, c - 1.5, 10.1)]
    half_landmarks.append((3, 16.2, 8.3))   # corner where the passage meets the hall
    half_landmarks.append((7, 20.5, 8.5))   # hall beacon
    landmarks = list(half_landmarks)
    landmarks += [(i, *rotate(x, y, cx, cy)) for i, x, y in half_landmarks]
    landmarks.append((50, 18.2, 10.6))      # L1: the only unique beacon

    nodes = grid_nodes(boxes, bounds, 1.0, 0.35)
    extra = []
    for c in centers:
        for k in range(8):
            extra.append((c, 0.5 + k))
    for x, y in extra + [rotate(x, y, cx, cy) for x, y in extra]:
        p = [round(x, 3), round(y, 3), 0.0]
        if p not in nodes and clear(boxes, bounds, x, y, 0.35):
            nodes.append(p)
    return scenario(
        "sixcorridor",
        "Six identical dead-end corridors, three off each of two passages that meet in a "
        "central hall; the map is symmetric under a half turn about the hall centre. "
        "C3 and C4 end next to a corner beacon; L1 (id 50) near the hall breaks the symmetry. "
        "Coordinates are a reconstruction.",
        bounds, boxes, landmarks, nodes,
        start=[19.0, 9.0, math.pi / 2], goal=[19.0, 15.0, math.pi / 2],
        kidnap={"trigger_region": {"x": 19.0, "y": 12.0, "radius": 0.6},
                "destination": [centers[1], 3.5, math.pi / 2]},
        planner={"target_radius": 4.0, "initial_belief": {"samples": 1000},
                 "rrt": {"inflation": 0.15}})


def main():
    for sc in (fourroom(), sixcorridor()):
        path = HERE / (sc["name"] + ".json")
        path.write_text(json.dumps(sc, indent=1) + "\n")
        print(f"{path.name}: {len(sc['obstacles'])} obstacles, "
              f"{len(sc['landmarks'])} landmarks, {len(sc['roadmap_nodes'])} nodes")


if __name__ == "__main__":
    main()
