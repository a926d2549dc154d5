# SPDX-License-Identifier: MIT OR Apache-2.0
"""Smoke test for the Python bindings.

Build and install first:

    pip install maturin
    cd crates/py && maturin build --release -o dist && pip install dist/*.whl
"""

import math

import mvtv


def close(a, b, tol):
    return all(abs(p - q) <= tol for ra, rb in zip(a, b) for p, q in zip(ra, rb))


def main():
    clean, noisy = mvtv.generate(1, 300, 4.0, seed=3)

    # univariate: streaming, direct and iterative solutions agree
    q1 = mvtv.CandidateSet.single(2.0, 1)
    segments, x_stream = mvtv.run_stream(noisy, q1)
    x_direct = mvtv.tv1d([s[0] for s in noisy], 2.0)
    x_exact, u = mvtv.solve_exact(noisy, 2.0)
    assert close(x_stream, [[v] for v in x_direct], 1e-8)
    assert close(x_stream, x_exact, 1e-6)
    assert mvtv.verify_kkt(x_exact, noisy, u, 2.0)
    assert segments[0].start == 0 and segments[-1].end == 299

    # bivariate: incremental feeding matches the batch run
    _, y2 = mvtv.generate(2, 200, 3.0, seed=5)
    q2 = mvtv.CandidateSet.dyadic(10.0, 5)
    assert len(q2) == 31
    batch, x2 = mvtv.run_stream(y2, q2)
    solver = mvtv.StreamSolver(q2)
    online = []
    for sample in y2:
        online += solver.push(sample)
        start, level = solver.provisional()
        assert len(level) == 2
    online += solver.finish()
    assert [(s.start, s.end, s.q) for s in online] == [(s.start, s.end, s.q) for s in batch]
    for s in batch:
        assert math.isclose(math.hypot(*s.zeta), 10.0, rel_tol=1e-12)

    x2_exact, _ = mvtv.solve_exact(y2, 10.0)
    print("bivariate mse to exact:", round(mvtv.mse(x2, x2_exact), 4))

    r = mvtv.change_indicator(x2)
    assert mvtv.jaccard(r, r, smoothed=False) == 1.0
    print("smoothed jaccard to exact:", round(mvtv.jaccard(r, mvtv.change_indicator(x2_exact)), 4))

    try:
        mvtv.CandidateSet(1.0, [[0.5, 0.5]])
    except ValueError:
        pass
    else:
        raise AssertionError("off-sphere candidate accepted")

    print("ok")


if __name__ == "__main__":
    main()
