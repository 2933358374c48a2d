"""Minimal protocol peer used to exercise the process predictor.

Answers every predict with a moving rectangle; command-line switches inject
protocol failures at chosen frames.
"""

import argparse
import json
import sys


def rle_of_rect(width, height, x, y, w, h):
    flat = [
        y <= yy < y + h and x <= xx < x + w
        for yy in range(height)
        for xx in range(width)
    ]
    runs = []
    current, count = False, 0
    for b in flat:
        if b == current:
            count += 1
        else:
            runs.append(count)
            current, count = b, 1
    runs.append(count)
    return runs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fail-at", type=int, default=-1)
    ap.add_argument("--garbage-at", type=int, default=-1)
    ap.add_argument("--die-at", type=int, default=-1)
    args = ap.parse_args()

    width = height = None
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        if msg["type"] == "init":
            width, height = msg["width"], msg["height"]
            continue
        if msg["type"] == "shutdown":
            return
        if msg["type"] != "predict":
            print(json.dumps({"type": "error", "message": f"unexpected {msg['type']}"}), flush=True)
            continue
        t = msg["frame_index"]
        if t == args.die_at:
            return
        if t == args.garbage_at:
            print("{not json", flush=True)
            continue
        if t == args.fail_at:
            print(json.dumps({"type": "error", "message": "scripted failure"}), flush=True)
            continue
        x = t % max(1, width - 4)
        runs = rle_of_rect(width, height, x, 1, 3, 3)
        empty = [width * height]
        reply = {
            "type": "prediction",
            "candidates": [
                {"rle": runs, "score": 0.9},
                {"rle": empty, "score": 0.0},
                {"rle": empty, "score": 0.0},
            ],
        }
        print(json.dumps(reply), flush=True)


if __name__ == "__main__":
    main()
