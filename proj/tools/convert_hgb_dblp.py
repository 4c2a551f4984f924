#!/usr/bin/env python3
"""Convert an HGB-layout DBLP folder (node.dat, link.dat, label.dat[, label.dat.test])
into the aghint dataset directory layout.

    python3 tools/convert_hgb_dblp.py HGB/DBLP data/dblp [--hgb-split]

Input contract
  node.dat        id \t name \t type \t comma-separated features (absent for venues)
  link.dat        src \t dst \t type \t weight; types 0-2 are author-paper,
                  paper-term, paper-venue, types 3-5 their reverses
  label.dat       id \t name \t type \t class      (training labels)
  label.dat.test  same layout                      (test labels, optional)

Only link types 0-2 are written; 3-5 are declared as their reverse types in
meta.json, so each undirected link is stored once and the loader reports
both directions. Node ids are renumbered so each type is contiguous.
"""

import argparse
import json
import random
import sys
from pathlib import Path

TYPE_NAMES = ["author", "paper", "term", "venue"]
KINDS = ["discrete", "discrete", "continuous", "continuous"]
EDGE_TYPES = [
    ("author-paper", 0, 1, 3),
    ("paper-term", 1, 2, 4),
    ("paper-venue", 1, 3, 5),
    ("paper-author", 1, 0, 0),
    ("term-paper", 2, 1, 1),
    ("venue-paper", 3, 1, 2),
]


def fail(msg):
    sys.exit(f"convert_hgb_dblp: {msg}")


def read_rows(path, min_cols):
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) < min_cols:
                fail(f"{path}:{ln}: expected at least {min_cols} columns")
            yield ln, cols


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=Path)
    ap.add_argument("dst", type=Path)
    ap.add_argument("--hgb-split", action="store_true",
                    help="write split.tsv: label.dat -> train/val (80:20, seeded), label.dat.test -> test")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    nodes = {}  # hgb id -> (type, features or None)
    for ln, cols in read_rows(args.src / "node.dat", 3):
        t = int(cols[2])
        if not 0 <= t < 4:
            fail(f"node.dat:{ln}: unknown node type {t}")
        feats = cols[3].split(",") if len(cols) > 3 and cols[3] else None
        nodes[int(cols[0])] = (t, feats)

    order = sorted(nodes, key=lambda i: (nodes[i][0], i))
    new_id, local, counts = {}, {}, [0, 0, 0, 0]
    for gid, old in enumerate(order):
        t = nodes[old][0]
        new_id[old] = gid
        local[old] = counts[t]
        counts[t] += 1

    dims = [0, 0, 0, len(TYPE_NAMES)]
    for t in range(3):
        sample = next((nodes[i][1] for i in order if nodes[i][0] == t and nodes[i][1]), None)
        if sample is None:
            fail(f"node type {TYPE_NAMES[t]} has no features")
        dims[t] = len(sample)

    edges = []
    for ln, cols in read_rows(args.src / "link.dat", 3):
        et = int(cols[2])
        if et >= 3:
            continue
        s, d = int(cols[0]), int(cols[1])
        if s not in new_id or d not in new_id:
            fail(f"link.dat:{ln}: unknown endpoint")
        if nodes[s][0] != EDGE_TYPES[et][1] or nodes[d][0] != EDGE_TYPES[et][2]:
            fail(f"link.dat:{ln}: endpoint types do not match link type {et}")
        edges.append((new_id[s], new_id[d], et))

    labels, tags = {}, {}
    for name, tag in (("label.dat", "train"), ("label.dat.test", "test")):
        path = args.src / name
        if not path.exists():
            continue
        for ln, cols in read_rows(path, 4):
            nid = int(cols[0])
            if nid not in nodes or nodes[nid][0] != 0:
                fail(f"{name}:{ln}: {nid} is not an author")
            labels[nid] = int(cols[3])
            tags[nid] = tag
    if not labels:
        fail("no labels found")
    classes = max(labels.values()) + 1

    out = args.dst
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "node_types": [
            {"name": n, "attr_kind": k, "attr_dim": d, **({} if t < 3 else {"features": False})}
            for t, (n, k, d) in enumerate(zip(TYPE_NAMES, KINDS, dims))
        ],
        "edge_types": [{"name": n, "src": s, "dst": d, "reverse": r} for n, s, d, r in EDGE_TYPES],
        "target_type": 0,
        "num_classes": classes,
        "multi_label": False,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    with open(out / "nodes.tsv", "w") as f:
        for old in order:
            f.write(f"{new_id[old]}\t{nodes[old][0]}\t{local[old]}\n")
    with open(out / "edges.tsv", "w") as f:
        for s, d, t in edges:
            f.write(f"{s}\t{d}\t{t}\n")
    for t in range(3):
        with open(out / f"features_{TYPE_NAMES[t]}.csv", "w") as f:
            for old in order:
                if nodes[old][0] != t:
                    continue
                feats = nodes[old][1]
                if feats is None or len(feats) != dims[t]:
                    fail(f"node {old}: expected {dims[t]} features")
                f.write(",".join(feats) + "\n")
    authors = [i for i in order if nodes[i][0] == 0]
    with open(out / "labels.tsv", "w") as f:
        for old in authors:
            f.write(f"{local[old]}\t{labels.get(old, '-')}\n")
    if args.hgb_split:
        train = [i for i in authors if tags.get(i) == "train"]
        random.Random(args.seed).shuffle(train)
        n_val = round(0.2 * len(train))
        split = {i: "val" for i in train[:n_val]}
        split.update({i: "train" for i in train[n_val:]})
        split.update({i: "test" for i in authors if tags.get(i) == "test"})
        with open(out / "split.tsv", "w") as f:
            for old in authors:
                if old in split:
                    f.write(f"{new_id[old]}\t{split[old]}\n")

    print(f"{len(order)} nodes, {2 * len(edges)} directed edges, {len(labels)} labeled authors, "
          f"{classes} classes -> {out}")


if __name__ == "__main__":
    main()
