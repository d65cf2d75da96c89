"""Smoke test for the pylvtensor extension.

Build first: cargo build --release -p lvtensor-py, then copy
target/release/libpylvtensor.so next to this file as pylvtensor.so.
"""

import os
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import pylvtensor as lv


def to_np(t):
    return np.array(t.values()).reshape(t.dims)


def from_np(a):
    return lv.Tensor(list(a.shape), a.ravel().tolist())


def main():
    rng = np.random.default_rng(0)

    a = rng.standard_normal((4, 5, 3))
    t = from_np(a)
    assert t.dims == [4, 5, 3] and len(t) == 60
    assert abs(t.get([1, 2, 0]) - a[1, 2, 0]) == 0.0
    u1 = np.array(t.unfold(1))
    assert u1.shape == (5, 12)
    # column index of (i1, i3) is i1 + 4 * i3
    assert u1[2, 1 + 4 * 2] == a[1, 2, 2]
    m = rng.standard_normal((2, 5))
    p = to_np(t.mode_product(1, m.tolist()))
    assert np.allclose(p, np.einsum("ajc,bj->abc", a, m))
    assert abs(t.frobenius_norm() - np.linalg.norm(a)) < 1e-12

    # exact recovery of a Tucker tensor
    theta = lv.generate("tucker", [12, 10, 8], 3, seed=7)
    for est in (lv.hosvd, lv.dse):
        x, fac = est(theta, [3, 3, 3])
        assert fac.ranks == [3, 3, 3]
        assert x.mse(theta) < 1e-20
        assert fac.reconstruct().mse(x) < 1e-20
    x, fac, iters, hist = lv.hooi(theta, [3, 3, 3])
    assert x.mse(theta) < 1e-20
    assert all(b >= a - 1e-9 for a, b in zip(hist, hist[1:]))

    # denoising beats the raw observation
    theta = lv.generate("model1", [30, 30, 30], 2, seed=1)
    sigma = lv.noise_sigma(theta, 0.5)
    y = lv.add_noise(theta, sigma, seed=2)
    ranks = lv.log_rank(y.dims, 1.0, 1)
    x, _ = lv.dse(y, ranks)
    assert x.mse(theta) < y.mse(theta)
    best_c, cv_ranks, table = lv.select_rank_cv(y, [0.5, 1.0, 2.0], folds=3, seed=3)
    assert best_c in (0.5, 1.0, 2.0) and len(table) == 3

    rank, curve = lv.epsilon_rank(theta, 0.05, 10)
    assert rank is not None and curve[rank - 1][1] <= 0.05

    # planted clusters along mode 0
    sig, labels = lv.planted_blocks([30, 20, 20], [1.0, -1.0, 2.0], seed=4)
    y = lv.add_noise(sig, 0.1, seed=5)
    found, _ = lv.cluster_mode(y, [3, 3, 3], 0, 3, seed=6)
    pairs = {(a, b) for a, b in zip(labels, found)}
    assert len(pairs) == 3, pairs

    km_labels, cents, w = lv.kmeans([[0.0], [0.1], [5.0], [5.1]], 2, seed=1)
    assert km_labels[0] == km_labels[1] != km_labels[2] == km_labels[3]

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "t.dtf")
        lv.write_dtf1(path, t)
        back = lv.read_dtf1(path)
        assert back.dims == t.dims and back.values() == t.values()
        with open(path, "wb") as f:
            f.write(b"XXXX")
        try:
            lv.read_dtf1(path)
        except OSError as e:
            assert "byte 0" in str(e)
        else:
            raise AssertionError("bad magic accepted")

    try:
        lv.Tensor([2, 2], [1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("length mismatch accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
