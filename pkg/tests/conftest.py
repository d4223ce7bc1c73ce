import numpy as np

TWO_PI = 2 * np.pi


def circular_multiset_residual(E1, E2):
    """Max elementwise distance between two quasienergy multisets on the
    circle, robust against branch representatives at exactly +-pi."""
    a = np.asarray(E1, dtype=float).ravel()
    b = np.asarray(E2, dtype=float).ravel()
    assert a.size == b.size
    both = np.sort(np.mod(np.concatenate([a, b]), TWO_PI))
    spac = np.diff(both)
    wrap = both[0] + TWO_PI - both[-1]
    i = int(np.argmax(np.concatenate([spac, [wrap]])))
    cut = both[i] + 0.5 * (spac[i] if i < len(spac) else wrap)
    sa = np.sort(np.mod(a - cut, TWO_PI))
    sb = np.sort(np.mod(b - cut, TWO_PI))
    return float(np.abs(sa - sb).max())
