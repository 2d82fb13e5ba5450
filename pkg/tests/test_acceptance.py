"""Acceptance suite: one PASS/FAIL line per criterion, at the required tolerances.

Lines are printed as each criterion finishes and repeated in the pytest
terminal summary. Run ``python3 tests/test_acceptance.py`` for the lines alone.
"""

import itertools
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from cpsdetect.balance import AdasynConfig, balance_dataset, imbalance_degree
from cpsdetect.classifier import CostModel, TrainConfig, cs_loss, negative_gradient, softmax, train
from cpsdetect.cli import PipelineConfig, run_pipeline, stratified_split
from cpsdetect.clustering import cluster, pca_fit, pca_inverse, pca_transform
from cpsdetect.datalink import (
    CyberSnapshot,
    FusedRecord,
    IndexTable,
    PhysicalSnapshot,
    StateDataLink,
    WindowConfig,
    compress_repeats,
    fuse_links,
)
from cpsdetect.metrics import adjusted_rand_index
from cpsdetect.scenario import ATTACK_STATES, STATES, ScenarioConfig, generate_arrays

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

# imbalance ratio 0.3016 / 0.08 = 3.77
SKEWED_PROPORTIONS = (0.3016, 0.24, 0.2, 0.1784, 0.08)
# attack-state mean recall on the seed-7 overlapped scenario, pinned at first build
RECALL_W1 = (1 + Fraction(145, 150) + Fraction(46, 48)) / 3
RECALL_W5 = (1 + Fraction(145, 150) + Fraction(47, 48)) / 3


def verdict(cid, title, checks, detail, elapsed, limit=None):
    ok = all(checks.values()) and (limit is None or elapsed < limit)
    failed = [k for k, v in checks.items() if not v]
    if limit is not None and elapsed >= limit:
        failed.append("runtime")
    budget = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit is not None else "")
    line = f"AC{cid} {'PASS' if ok else 'FAIL'}  {title}: {detail}  [{budget}]"
    if failed:
        line += "  failed: " + ", ".join(failed)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# -- 1 -----------------------------------------------------------------------------

def test_ac1_gradient_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        K = int(rng.integers(2, 8))
        f = rng.normal(0, 2, K)
        c = np.eye(K)[rng.integers(K)]
        w = rng.uniform(0.5, 5, K)
        g = negative_gradient(c, softmax(f), w[c.argmax()])
        fd = np.empty(K)
        for k in range(K):
            e = np.zeros(K)
            e[k] = h
            fd[k] = -(cs_loss(softmax(f + e), c, w) - cs_loss(softmax(f - e), c, w)) / (2 * h)
        # relative error of the gradient vector
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    dt = time.perf_counter() - t0
    verdict(1, "gradient vs central differences", {"rel<=1e-6": worst <= 1e-6},
            f"100 cases, worst relative error {worst:.2e}", dt, 1.0)


# -- 2 -----------------------------------------------------------------------------

def _ari_pairs(a, b):
    n = len(a)
    both = sa = sb = 0
    for i, j in itertools.combinations(range(n), 2):
        x, y = a[i] == a[j], b[i] == b[j]
        both += x and y
        sa += x
        sb += y
    expected = Fraction(sa * sb, n * (n - 1) // 2)
    top = Fraction(sa + sb, 2)
    if top == expected:
        return 1.0 if sa == sb == both else 0.0
    return float((both - expected) / (top - expected))


def test_ac2_ari_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        a = rng.integers(0, rng.integers(1, n + 1), n).tolist()
        b = rng.integers(0, rng.integers(1, n + 1), n).tolist()
        mismatches += adjusted_rand_index(a, b) != _ari_pairs(a, b)
    ident = adjusted_rand_index([0, 1, 1, 2, 2, 2], [4, 3, 3, 9, 9, 9])
    dt = time.perf_counter() - t0
    verdict(2, "ARI vs brute-force pair counting",
            {"exact": mismatches == 0, "identical=1": ident == 1.0},
            f"1000 labelings n<=8, {mismatches} mismatches, ARI(identical)={ident}", dt, 5.0)


# -- 3 -----------------------------------------------------------------------------

def test_ac3_pca():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    orth = recon = eig = 0.0
    for _ in range(20):
        X = rng.normal(size=(200, 10)) @ rng.normal(size=(10, 10))
        m = pca_fit(X, n_components=10)
        orth = max(orth, np.abs(m.components @ m.components.T - np.eye(10)).max())
        recon = max(recon, np.abs(pca_inverse(m, pca_transform(m, X)) - X).max())
        oracle = np.linalg.eigvalsh(np.cov(X, rowvar=False))[::-1]
        eig = max(eig, np.abs(m.eigenvalues - oracle).max())
    dt = time.perf_counter() - t0
    verdict(3, "PCA orthonormality / reconstruction / eigenvalues",
            {"orth<=1e-10": orth <= 1e-10, "recon<=1e-8": recon <= 1e-8, "eig<=1e-8": eig <= 1e-8},
            f"20 random 200x10 matrices, max errors {orth:.1e} / {recon:.1e} / {eig:.1e}", dt)


# -- 4 -----------------------------------------------------------------------------

def test_ac4_two_step_clustering():
    X, y = generate_arrays(ScenarioConfig(n_records=5000, n_features=56, separation=8.0,
                                          overlap=0.0, seed=42))
    t0 = time.perf_counter()
    m = cluster(X)
    dt = time.perf_counter() - t0
    ari = adjusted_rand_index(y, m.labels)
    verdict(4, "two-step clustering on the 5-state generator",
            {"k=5": m.k == 5, "ARI>=0.97": ari >= 0.97},
            f"N=5000 d=56 sep=8 seed=42: k={m.k}, ARI={ari:.4f}, "
            f"{m.pca.n_components} PCA components, {int(m.outlier_flags.sum())} outliers", dt, 30.0)


# -- 5 -----------------------------------------------------------------------------

def test_ac5_adasyn_balance():
    X, y = generate_arrays(ScenarioConfig(n_records=5000, proportions=SKEWED_PROPORTIONS,
                                          seed=42))
    before = imbalance_degree(np.bincount(y))
    t0 = time.perf_counter()
    out = balance_dataset(X, y, AdasynConfig(alpha=1.2, beta=1.0, neighbors=5, seed=42))
    dt = time.perf_counter() - t0
    counts = np.bincount(out.y)
    after = imbalance_degree(counts)
    shares = counts / counts.sum()
    verdict(5, "ADASYN balance",
            {"start=3.77": abs(before - 3.77) < 1e-9,
             "ratio<=1.2+1 sample": counts.max() / (counts.min() + 1) <= 1.2,
             "shares 20%+-4%": bool(np.all(np.abs(shares - 0.2) <= 0.04))},
            f"imbalance {before:.2f} -> {after:.4f}, shares "
            + "/".join(f"{s:.3f}" for s in shares), dt, 10.0)


# -- 6 and 8 share the default pipeline run -------------------------------------------------

@pytest.fixture(scope="module")
def default_runs(tmp_path_factory):
    runs = []
    for name in ("run1", "run2"):
        out = tmp_path_factory.mktemp(name)
        t0 = time.perf_counter()
        report = run_pipeline(PipelineConfig(seed=42), out)
        runs.append((out, report, time.perf_counter() - t0))
    return runs


def test_ac6_cs_gbdt_end_to_end(default_runs):
    out, rep, dt = default_runs[0]
    model = json.loads((out / "model.json").read_text())
    loss = np.array(model["loss_trace"])
    rec = rep["recall"]
    verdict(6, "CS-GBDT default scenario",
            {"macroAUC>=0.95": rep["macro_auc"] >= 0.95,
             "recall>=0.90": min(rec.values()) >= 0.90,
             "macroF1>=0.93": rep["macro_f1"] >= 0.93,
             "130 iters": len(loss) == 131,
             "loss non-increasing": bool(np.all(np.diff(loss) <= 1e-9))},
            f"macro AUC {rep['macro_auc']:.4f}, macro F1 {rep['macro_f1']:.4f}, min recall "
            f"{min(rec.values()):.4f} ({min(rec, key=rec.get)}), max loss step "
            f"{np.diff(loss).max():.1e}", dt, 120.0)


def test_ac8_determinism(default_runs):
    (a, _, ta), (b, _, tb) = default_runs
    same = {f: (a / f).read_bytes() == (b / f).read_bytes()
            for f in ("model.json", "report.json")}
    manifest = json.loads((a / "manifest.json").read_text())["files"] == \
        json.loads((b / "manifest.json").read_text())["files"]
    verdict(8, "pipeline determinism",
            {"model.json": same["model.json"], "report.json": same["report.json"],
             "manifest": manifest},
            "two seed-42 runs, byte-identical model/report JSON and all manifest hashes",
            ta + tb)


# -- 7 -----------------------------------------------------------------------------

def test_ac7_cost_sensitivity():
    X, y = generate_arrays(ScenarioConfig(n_records=2000, overlap=0.7, seed=7))
    labels = np.array(STATES)[y]
    tr, te = stratified_split(labels, 0.7, 7)
    bal = balance_dataset(X[tr], labels[tr], AdasynConfig(seed=7))
    t0 = time.perf_counter()
    recall = {}
    for w in (1.0, 5.0):
        m = train(bal.X, bal.y, TrainConfig(), CostModel.for_labels(STATES, attack_weight=w))
        pred = m.predict(X[te])
        recall[w] = np.mean([np.mean(pred[labels[te] == s] == s) for s in ATTACK_STATES])
    dt = time.perf_counter() - t0
    verdict(7, "cost sensitivity (seed 7, overlap 0.7)",
            {"w5>=w1": recall[5.0] >= recall[1.0],
             "pinned w1": abs(recall[1.0] - float(RECALL_W1)) <= 1e-12,
             "pinned w5": abs(recall[5.0] - float(RECALL_W5)) <= 1e-12},
            f"attack recall w=1 {recall[1.0]:.6f}, w=5 {recall[5.0]:.6f}", dt)


# -- 9 -----------------------------------------------------------------------------

def test_ac9_datalink_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    bad_compress = bad_fuse = 0
    for _ in range(1000):
        n = int(rng.integers(0, 40))
        vals = rng.integers(0, 3, (n, 2)).astype(float) + rng.choice([0, 0.05], (n, 2))
        link = StateDataLink(tuple(FusedRecord(float(i), "A", "L", "X", "ip", tuple(v))
                                   for i, v in enumerate(vals)))
        tol = float(rng.choice([0.0, 0.1, 1.0]))
        once = compress_repeats(link, tol)
        bad_compress += (compress_repeats(once, tol) != once
                         or sum(r.repeat_count for r in once) != n)
    for _ in range(300):
        k = int(rng.integers(1, 8))
        index = IndexTable.from_rows([(f"A{i % 2}", f"L{i}", f"X{i}", f"ip{i}") for i in range(k)])
        phys = [PhysicalSnapshot(f"X{rng.integers(k)}", float(t), (float(t),))
                for t in rng.uniform(0, 10, rng.integers(0, 30))]
        cyb = [CyberSnapshot(f"ip{rng.integers(k)}", float(t), 0.0, 0.0, 0.0)
               for t in rng.uniform(0, 10, rng.integers(0, 30))]
        link = fuse_links(phys, cyb, index, WindowConfig(1.0, float(rng.uniform(0.2, 1.0))))
        pairs = {(e.component_id, e.ip) for e in index.rows}
        ts = [r.timestamp for r in link]
        bad_fuse += not (len(link) <= min(len(phys), len(cyb))
                         and 2 * len(link) + link.dropped == len(phys) + len(cyb)
                         and all((r.component_id, r.ip) in pairs for r in link)
                         and ts == sorted(ts))
    dt = time.perf_counter() - t0
    verdict(9, "datalink algebra",
            {"compress": bad_compress == 0, "fuse": bad_fuse == 0},
            f"1000 fuzzed links ({bad_compress} violations), 300 fuzzed topologies "
            f"({bad_fuse} violations)", dt, 10.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider",
                          "--rootdir", str(Path(__file__).parent)]))
