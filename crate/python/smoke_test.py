"""Smoke test for the netsig extension module.

Build and install first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/netsig-*.whl
    python python/smoke_test.py
"""

import itertools
import json
import os
import random
import sys
import tempfile

import netsig


def check(cond, what):
    if not cond:
        raise AssertionError(what)
    print(f"ok  {what}")


def main():
    # ordering invariance under relabeling
    rng = random.Random(0)
    hits = 0
    for _ in range(100):
        edges = [(u, v) for u, v in itertools.combinations(range(12), 2) if rng.random() < 0.3]
        g = netsig.Graph(12, edges)
        perm = list(range(12))
        rng.shuffle(perm)
        img, order = netsig.structured_image(g)
        img2, order2 = netsig.structured_image(g.relabel(perm))
        if order.fully_disambiguated and order2.fully_disambiguated:
            hits += 1
            if img != img2:
                raise AssertionError(f"images differ for {edges} under {perm}")
        if netsig.reconstruct(img, order) != g:
            raise AssertionError("reconstruction failed")
    check(hits > 10, f"invariant images on {hits} disambiguated pairs, lossless reconstruction")

    # fixtures
    k3 = netsig.Graph(3, [(0, 1), (1, 2), (0, 2)])
    eig = netsig.top_two_eigenvalues(k3)
    check(abs(eig[0] - 2) < 1e-9 and abs(eig[1] + 1) < 1e-9, f"K3 eigenvalues {eig}")
    feats = netsig.classical_features(k3)
    check(feats["transitivity"] == 1.0 and feats["density"] == 1.0, "K3 classical features")

    c6 = netsig.Graph(6, [(i, (i + 1) % 6) for i in range(6)])
    two_k3 = netsig.Graph(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    d = netsig.WlDictionary()
    a, b = netsig.wl_features(c6, 2, d), netsig.wl_features(two_k3, 2, d)
    check(a.counts() == b.counts() and netsig.wl_kernel(a, b) > 0, "WL blind spot on C6 vs 2xK3")

    check(abs(netsig.jaccard_similarity(["a", "b", "c"], ["b", "c", "d"]) - 0.5) < 1e-12, "jaccard 2/4")
    train = [(["a", "b"], 0), (["a", "c"], 0), (["x", "y"], 1), (["x", "z"], 1)]
    check(netsig.knn_classify(train, ["a", "q"], k=3, seed=1) == 0, "k-NN majority")

    metrics = netsig.confusion_metrics([[8928, 672], [372, 5000]])
    p, r, f1 = metrics["per_class"][0]
    check(abs(p - 0.96) < 1e-12 and abs(r - 0.93) < 1e-12 and abs(f1 - 0.94) <= 0.005, "P/R/F1 consistency")

    # images, pgm round trip, stub recognizer
    parent = netsig.Graph.synthetic("barabasi_albert", {"n": 300, "m": 2}, seed=7)
    check(parent.edge_count() == 1 + 2 * 298, "BA edge count")
    nodes, sub = parent.random_walk_sample(16, seed=3)
    check(len(nodes) == 16 and sub.is_connected(), "random walk sample")
    img, _ = netsig.structured_image(sub)
    check(netsig.StructuredImage.from_pgm(img.to_pgm(scale=3), scale=3) == img, "PGM round trip")
    labels = netsig.stub_recognizer("hubs_0_16", img)
    check(1 <= len(labels) <= 10 and labels == sorted(labels, key=lambda x: -x[1]), "stub recognizer")

    # learner on a toy problem
    xs = [[float(i % 2), float(i % 2 == 0), rng.random()] for i in range(60)]
    ys = [i % 2 for i in range(60)]
    model = netsig.train("linear", xs, ys, 2, representation="classical", epochs=100, learning_rate=0.1)
    acc = sum(model.classify(x) == y for x, y in zip(xs, ys)) / len(xs)
    check(acc == 1.0, "linear model separates a separable toy set")
    again = netsig.Model.from_bytes(model.to_bytes())
    check(again.predict(xs[0]) == model.predict(xs[0]), "model byte round trip")

    # experiment runners from a manifest
    manifest = {
        "version": 1,
        "classes": [
            {"name": "er", "synthetic": {"family": "erdos_renyi", "params": {"n": 500, "p": 0.02}, "seed": 1}},
            {"name": "ws", "synthetic": {"family": "watts_strogatz", "params": {"n": 500, "k": 4, "beta": 0.1}, "seed": 2}},
        ],
    }
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "manifest.json")
        with open(path, "w") as f:
            json.dump(manifest, f)
        r1 = netsig.run_supervised(path, 16, 60, seed=5)
        r2 = netsig.run_supervised(path, 16, 60, seed=5)
        check(r1 == r2 and r1["accuracy"] > 0.6, f"supervised run {r1['accuracy']:.3f}, replayable")
        t = netsig.run_transfer(path, 16, 60, k=5, seed=5)
        check(t["accuracy"] > 0.6, f"transfer run {t['accuracy']:.3f}")
        samples = netsig.sample_dataset(path, 8, 5, 1)
        check(len(samples) == 10 and samples[0][0] == 0, "sample_dataset")

    check(netsig.Graph(3, [(0, 0), (0, 1), (1, 0)]).edges() == [(0, 1)], "self loops and duplicates dropped")
    try:
        netsig.Graph(3, [(0, 5)])
    except ValueError:
        check(True, "out-of-range endpoint raises ValueError")
    else:
        raise AssertionError("out-of-range endpoint accepted")

    print("all smoke checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
