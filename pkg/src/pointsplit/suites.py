"""Stock test-function families for identity checks and estimators."""
from __future__ import annotations

import math

import numpy as np

from .functionals import CampbellTestFunction
from .measure import DiscreteSpace, Window, atom_values, indicator
from .stats import base_functions


def lemma_basis(k: int) -> list:
    """Twenty-one indicator-style ``h(x, mu)`` on a ``k``-atom space."""
    H = CampbellTestFunction
    hs = [H(lambda x, mu: 1.0, 1.0, "one")]
    for a in range(3):
        hs.append(H(lambda x, mu, a=a: float(x == a % k), 1.0, f"x=={a}"))
    for j in range(5):
        hs.append(H(lambda x, mu, j=j: float(mu.total == j), 1.0, f"|mu|=={j}"))
    for a in range(3):
        for j in (1, 2):
            hs.append(H(lambda x, mu, a=a, j=j: float(mu[a % k] >= j), 1.0, f"mu[{a}]>={j}"))
    for a, b in ((0, 1), (1, 2), (2, 0)):
        hs.append(H(lambda x, mu, a=a, b=b: float(x == a % k and mu[b % k] == 1), 1.0,
                    f"x=={a}&mu[{b}]==1"))
    hs.append(H(lambda x, mu: min(mu.total, 5) / 5.0, 1.0, "min(|mu|,5)/5"))
    hs.append(H(lambda x, mu: math.exp(-mu.total), 1.0, "exp(-|mu|)"))
    hs.append(H(lambda x, mu: float(mu[x] >= 2), 1.0, "mu[x]>=2"))
    return hs


def campbell_suite(space) -> list:
    """Ten bounded ``h(x, mu)`` suited to Mecke residual checks on ``space``."""
    H = CampbellTestFunction
    if isinstance(space, DiscreteSpace):
        k = space.k
        return [
            H(lambda x, mu: 1.0, 1.0, "one"),
            H(lambda x, mu: float(x == 0), 1.0, "x==0"),
            H(lambda x, mu: float(mu.total == 1), 1.0, "|mu|==1"),
            H(lambda x, mu: float(mu.total >= 2), 1.0, "|mu|>=2"),
            H(lambda x, mu: math.exp(-mu.total), 1.0, "exp(-|mu|)"),
            H(lambda x, mu: float(mu[x] == 1), 1.0, "mu[x]==1"),
            H(lambda x, mu: float(mu[x] >= 2), 1.0, "mu[x]>=2"),
            H(lambda x, mu: min(mu.total, 4) / 4.0, 1.0, "min(|mu|,4)/4"),
            H(lambda x, mu: float(x == 0 and mu[1 % k] >= 1), 1.0, "x==0&mu[1]>=1"),
            H(lambda x, mu: float(mu.total == 3), 1.0, "|mu|==3"),
        ]
    lo = np.asarray(space.lower)
    span = np.asarray(space.upper) - lo
    scale = float(span.min())

    def pts(mu):
        return np.array(mu.locations(), dtype=float).reshape(-1, space.d), mu.multiplicities()

    def near(x, mu, r):
        p, m = pts(mu)
        if len(m) == 0:
            return 0
        return int(m[np.max(np.abs(p - np.asarray(x)), axis=1) <= r].sum())

    def in_left(x):
        return (x[0] - lo[0]) < 0.5 * span[0]

    def left_count(mu):
        p, m = pts(mu)
        return int(m[(p[:, 0] - lo[0]) < 0.5 * span[0]].sum()) if len(m) else 0

    return [
        H(lambda x, mu: 1.0, 1.0, "one"),
        H(lambda x, mu: float(in_left(x)), 1.0, "x in left"),
        H(lambda x, mu: math.exp(-mu.total), 1.0, "exp(-|mu|)"),
        H(lambda x, mu: float(mu.total >= 3), 1.0, "|mu|>=3"),
        H(lambda x, mu: float(mu.total == 1), 1.0, "|mu|==1"),
        H(lambda x, mu: float(near(x, mu, 0.2 * scale) >= 2), 1.0, "neighbour within .2"),
        H(lambda x, mu: math.exp(-near(x, mu, 0.3 * scale)), 1.0, "exp(-near .3)"),
        H(lambda x, mu: float(in_left(x) and mu.total - left_count(mu) >= 1), 1.0,
          "x left & right nonempty"),
        H(lambda x, mu: min(mu.total, 5) / 5.0, 1.0, "min(|mu|,5)/5"),
        H(lambda x, mu: float(np.clip((x[0] - lo[0]) / span[0], 0, 1)) * math.exp(-mu.total / 2),
          1.0, "x0*exp(-|mu|/2)"),
    ]


def laplace_suite(space) -> list:
    """Test functions for Laplace-transform estimates on ``space``."""
    if isinstance(space, DiscreteSpace):
        k = space.k
        out = [indicator(space, 1.0, "1[all]"), indicator(space, 0.25, "0.25*1[all]")]
        out += [atom_values([math.log(2) * (x == a) for x in range(k)], f"ln2*1[{a}]")
                for a in range(k)]
        out.append(atom_values([0.3 * (x + 1) for x in range(k)], "0.3*(x+1)"))
        return out
    if isinstance(space, Window):
        return base_functions(space)
    raise TypeError(f"unknown space {space!r}")
