#!/usr/bin/env python3
"""Generate the polar-code parity-check matrices shipped under src/bicmlab/data.

Construction: Bhattacharyya-parameter polarization for the BEC(0.5) design
channel (z -> {2z - z^2, z^2} per split), information set = the k most
reliable synthetic channels, generator = the matching rows of the n-fold
Kronecker power of [[1, 0], [1, 1]], parity check = a basis of the dual.
Deterministic, so the shipped files are reproducible from this script.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from bicmlab.gf2code import (  # noqa: E402
    LinearCode,
    derive_generator,
    dump_alist,
    gf2_matmul,
    gf2_rank,
)

F2 = np.array([[1, 0], [1, 1]], dtype=np.uint8)


def kron_power(n: int) -> np.ndarray:
    m = np.array([[1]], dtype=np.uint8)
    while m.shape[0] < n:
        m = np.kron(m, F2)
    return m


def bhattacharyya(n: int) -> np.ndarray:
    z = np.array([0.5], dtype=np.float64)
    while z.size < n:
        out = np.empty(2 * z.size)
        out[0::2] = 2 * z - z * z
        out[1::2] = z * z
        z = out
    return z


def polar_parity_check(n: int, k: int) -> np.ndarray:
    z = bhattacharyya(n)
    info = np.sort(np.argsort(z, kind="stable")[:k])
    g = kron_power(n)[info, :]
    # H spans the dual code: the null space of G
    h = derive_generator(g)
    assert h.shape == (n - k, n)
    assert gf2_rank(h) == n - k
    assert not np.any(gf2_matmul(g, h.T))
    return h


def main() -> None:
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "src" / "bicmlab" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    for n, k in [(16, 8), (32, 16), (64, 32), (128, 64)]:
        h = polar_parity_check(n, k)
        code = LinearCode.from_parity_check(h, name=f"polar_{n}_{k}")
        assert code.n == n and code.k == k
        path = out_dir / f"polar_{n}_{k}.alist"
        path.write_text(dump_alist(h), encoding="ascii")
        print(f"wrote {path} ({n},{k}) rank(H)={gf2_rank(h)}")


if __name__ == "__main__":
    main()
