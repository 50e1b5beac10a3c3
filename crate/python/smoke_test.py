"""Smoke test for the corona_py extension. Run: python python/smoke_test.py"""

import os
import tempfile

import numpy as np

import corona_py as cp


def casorati(m):
    t = m.shape[0]
    return m.reshape(t, -1).T


def main():
    sim = cp.simulate(seed=3, height=32, width=32, frames=16, vessel=(12, 18, 0.2, 1))
    d, l, s, n = sim["d"], sim["l"], sim["s"], sim["n"]
    assert d.shape == (16, 32, 32) and d.dtype == np.complex128
    assert np.array_equal(d, l + s + n)
    again = cp.simulate(seed=3, height=32, width=32, frames=16, vessel=(12, 18, 0.2, 1))
    assert np.array_equal(again["d"], d)
    assert len(sim["bubble_counts"]) == 16

    # SVD filter against numpy
    u, sv, vh = np.linalg.svd(casorati(d), full_matrices=False)
    sv[:2] = 0
    ref = ((u * sv) @ vh).T.reshape(d.shape)
    out = cp.svd_filter(d, 2)
    assert np.allclose(out, ref, rtol=1e-9, atol=1e-12 * np.abs(d).max())
    assert np.allclose(cp.svd_filter(d, 0), d, rtol=0, atol=1e-12)

    # wall filter removes a constant
    dc = np.ones((40, 4, 4), dtype=np.complex128)
    assert np.abs(cp.wall_filter(dc)).max() < 1e-6

    # ISTA objective never rises
    lam1, lam2 = 0.05, 0.01
    _, _, hist = cp.solve(d, lambda1=lam1, lambda2=lam2, max_iters=50, rel_tol=1e-12, variant="ista", lipschitz=2.0)
    assert all(b <= a + 1e-10 * abs(a) for a, b in zip(hist, hist[1:]))
    lf, sf, _ = cp.solve(d, lambda1=lam1, lambda2=lam2, max_iters=200, rel_tol=1e-9)
    assert lf.shape == d.shape and np.isfinite(sf).all()

    # pinned network equals K ISTA steps
    k = 3
    net = cp.Network.from_ista(k, 2.0)
    net.pin_thresholds(lam1 / 2.0, lam2 / 2.0)
    ln, sn = net.forward(d)
    li, si, _ = cp.solve(d, lambda1=lam1, lambda2=lam2, max_iters=k, rel_tol=1e-300, variant="ista", lipschitz=2.0)
    assert np.allclose(ln, li, rtol=1e-6, atol=1e-9) and np.allclose(sn, si, rtol=1e-6, atol=1e-9)
    assert net.depth == k and net.params().shape == (net.param_count,)

    img = cp.mip(s)
    assert np.allclose(img, np.abs(s).max(axis=0))
    db = cp.to_db(img, -60.0)
    assert db.max() == 0.0 and db.min() >= -60.0
    cr = cp.contrast_ratio(img, (12, 4, 6, 24), (0, 4, 8, 24))
    cnr = cp.cnr(img, (12, 4, 6, 24), (0, 4, 8, 24))
    assert np.isfinite(cr) and np.isfinite(cnr)

    with tempfile.TemporaryDirectory() as tmp:
        p16 = os.path.join(tmp, "d16.npy")
        cp.write_movie(d, p16, dtype="c16")
        assert np.array_equal(cp.read_movie(p16), d)
        assert np.array_equal(np.load(p16), d)
        p8 = os.path.join(tmp, "d8.npy")
        cp.write_movie(d, p8)
        assert np.load(p8).dtype == np.complex64
        w = os.path.join(tmp, "net.bin")
        net.save(w)
        back = cp.Network.load(w)
        assert np.array_equal(back.params(), net.params())

    try:
        cp.svd_filter(d, 10_000)
    except ValueError:
        pass
    else:
        raise AssertionError("oversized cut rank accepted")

    print(f"smoke test OK (cr={cr:.2f} dB, cnr={cnr:.2f} dB, {net!r})")


if __name__ == "__main__":
    main()
