"""Random-projection encoder mapping observations to graph vertex keys."""

from __future__ import annotations

import numpy as np

from ter.core import StateKey


class ProjectionMatrix:
    """Fixed Gaussian projection ``M`` of shape ``(d, D)``, entries ~ N(0, 1/d).

    Keys are the exact bytes of the float64 projected vector, so two
    observations share a vertex iff their projections are bit-identical.
    The product is evaluated as an elementwise multiply followed by a
    row-wise numpy sum rather than through BLAS, which keeps the result
    independent of input memory alignment. Keys are reproducible on a
    given platform; bit equality across platforms additionally relies on
    IEEE-conformant float64 arithmetic in numpy's pairwise summation.
    """

    def __init__(self, obs_dim: int, d: int = 3, seed: int | np.random.SeedSequence = 0):
        if obs_dim < 1 or d < 1:
            raise ValueError("obs_dim and d must be positive")
        self.obs_dim = int(obs_dim)
        self.d = int(d)
        self.seed = seed
        rng = np.random.default_rng(seed)
        m = rng.normal(0.0, np.sqrt(1.0 / d), size=(self.d, self.obs_dim))
        m.setflags(write=False)
        self.M = m

    def embed(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s)
        if s.ndim != 1 or s.shape[0] != self.obs_dim:
            raise ValueError(f"expected observation of length {self.obs_dim}, got shape {s.shape}")
        # "+ 0.0" folds -0.0 into 0.0 so equal values always share a key
        return (self.M * s.astype(np.float64)).sum(axis=1) + 0.0

    def project(self, s: np.ndarray) -> StateKey:
        return self.embed(s).tobytes()

    __call__ = project


def key_to_vector(key: StateKey) -> np.ndarray:
    return np.frombuffer(key, dtype=np.float64)
