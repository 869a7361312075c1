#!/usr/bin/env python3
"""Scripted backend for tests: one request envelope on stdin, one reply on stdout.

usage: stub_backend.py MODE
"""
import json
import os
import sys
import time


def reply(payload):
    print(json.dumps({"v": 1, "payload": payload}))


def main():
    mode = sys.argv[1]
    req = json.loads(sys.stdin.readline())
    p = req["payload"]
    state = os.environ.get("SCITIKZ_STUB_STATE")
    if state:
        with open(state, "a") as f:
            f.write(req["kind"] + "\n")

    if mode == "embed":
        reply({"dim": 8, "vector": [float(i + 1) for i in range(8)]})
    elif mode == "embed-short":
        reply({"dim": 8, "vector": [1.0] * 7})
    elif mode == "embed-wide":
        reply({"dim": 9, "vector": [1.0] * 9})
    elif mode == "embed-grow":
        with open(state) as f:
            dim = 7 + len(f.read().splitlines())
        reply({"dim": dim, "vector": [1.0] * dim})
    elif mode == "perceptual":
        reply({"distance": 0.25})
    elif mode == "repair-echo":
        reply({"code": p["code"]})
    elif mode == "judge-echo":
        # the code field carries the scripted reply text
        reply({"text": p["code"]})
    elif mode == "judge-by-code":
        low = "red" in p["code"]
        scores = [2, 5, 5, 5, 5] if low else [5, 4, 4, 4, 3]
        keys = ["correctness", "layout_precision", "readability",
                "scientific_plausibility", "visual_complexity"]
        obj = dict(zip(keys, scores))
        obj["total_score"] = sum(scores)
        reply({"text": "Assessment follows.\n" + json.dumps(obj)})
    elif mode == "policy":
        reply({"codes": ["\\draw (0,0) -- (1,1);"] * p["n"]})
    elif mode == "policy-short":
        reply({"codes": []})
    elif mode == "sleep":
        time.sleep(30)
    elif mode == "flaky":
        with open(state) as f:
            calls = len(f.read().splitlines())
        if calls < 2:
            sys.exit(3)
        reply({"distance": 0.5})
    elif mode == "garbage":
        print("this is not json")
    elif mode == "error":
        print(json.dumps({"v": 1, "error": "model unavailable"}))
    else:
        sys.exit(9)


if __name__ == "__main__":
    main()
