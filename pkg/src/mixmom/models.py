"""Synthetic conditionally independent mixtures and sampling protocols.

A mixture is a list of components; each component has a weight and one
scalar distribution per coordinate. Sampling draws component labels from one
random stream and every (component, coordinate) cell from its own stream
(see _rng), so a fixed seed reproduces the data no matter how the fills are
chunked. Analytic first and second raw moments back the evaluation tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._rng import COORD, LABELS, PARAMS, stream
from .errors import ConfigError

DISCRETE_SUPPORT = np.arange(1, 6, dtype=float)


@dataclass
class Coord:
    """One coordinate's distribution: dist tag plus parameters."""

    dist: str
    params: dict

    def sample(self, rng, size):
        q = self.params
        if self.dist == "gaussian":
            return q["mu"] + q["sigma"] * rng.standard_normal(size)
        if self.dist == "bernoulli":
            return (rng.random(size) < q["mu"]).astype(float)
        if self.dist == "gamma":
            return rng.gamma(q["shape"], q["scale"], size)
        if self.dist == "poisson":
            return rng.poisson(q["lam"], size).astype(float)
        if self.dist == "discrete":
            return rng.choice(DISCRETE_SUPPORT, size=size, p=q["alpha"])
        raise ConfigError(f"unknown distribution {self.dist!r}")

    def mean(self):
        return self.moment(1)

    def moment(self, s):
        """Raw moment E[X^s]; s <= 2 for all dists, any s where closed forms
        are one-liners (bernoulli, discrete)."""
        q = self.params
        if self.dist == "bernoulli":
            return float(q["mu"])
        if self.dist == "discrete":
            alpha = np.asarray(q["alpha"], dtype=float)
            return float((DISCRETE_SUPPORT**s) @ alpha)
        if s == 1:
            if self.dist == "gaussian":
                return float(q["mu"])
            if self.dist == "gamma":
                return float(q["shape"] * q["scale"])
            if self.dist == "poisson":
                return float(q["lam"])
        if s == 2:
            if self.dist == "gaussian":
                return float(q["mu"] ** 2 + q["sigma"] ** 2)
            if self.dist == "gamma":
                return float(q["shape"] * (q["shape"] + 1) * q["scale"] ** 2)
            if self.dist == "poisson":
                return float(q["lam"] ** 2 + q["lam"])
        raise ConfigError(f"no closed-form moment {s} for {self.dist!r}")

    def validate(self):
        q = self.params
        if self.dist == "gaussian":
            ok = "mu" in q and q.get("sigma", -1) >= 0
        elif self.dist == "bernoulli":
            ok = 0 <= q.get("mu", -1) <= 1
        elif self.dist == "gamma":
            ok = q.get("shape", 0) > 0 and q.get("scale", 0) > 0
        elif self.dist == "poisson":
            ok = q.get("lam", -1) >= 0
        elif self.dist == "discrete":
            alpha = np.asarray(q.get("alpha", []), dtype=float)
            ok = alpha.shape == (5,) and np.all(alpha >= 0) and abs(alpha.sum() - 1) < 1e-8
        else:
            raise ConfigError(f"unknown distribution {self.dist!r}")
        if not ok:
            raise ConfigError(f"invalid parameters for {self.dist!r}: {q}")


@dataclass
class Component:
    weight: float
    coords: list

    @property
    def n(self):
        return len(self.coords)


@dataclass
class MixtureSpec:
    components: list

    @property
    def r(self):
        return len(self.components)

    @property
    def n(self):
        return self.components[0].n

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    def component_means(self):
        return self.component_moments(1)

    def component_moments(self, s):
        """n x r matrix, column j holding E[X_i^s] under component j."""
        return np.array(
            [[coord.moment(s) for coord in comp.coords] for comp in self.components]
        ).T

    def validate(self):
        if not self.components:
            raise ConfigError("mixture needs at least one component")
        n = self.n
        for comp in self.components:
            if comp.n != n:
                raise ConfigError("components disagree on the number of coordinates")
            if comp.weight <= 0:
                raise ConfigError("component weights must be positive")
            for coord in comp.coords:
                coord.validate()
        if abs(float(self.weights.sum()) - 1.0) > 1e-8:
            raise ConfigError("component weights must sum to 1")
        return self

    def to_json(self):
        return {
            "components": [
                {
                    "weight": float(c.weight),
                    "coords": [
                        {"dist": coord.dist, **_plain(coord.params)}
                        for coord in c.coords
                    ],
                }
                for c in self.components
            ]
        }

    @classmethod
    def from_json(cls, obj):
        try:
            comps = []
            for c in obj["components"]:
                coords = []
                for entry in c["coords"]:
                    entry = dict(entry)
                    dist = entry.pop("dist")
                    coords.append(Coord(dist=dist, params=entry))
                comps.append(Component(weight=float(c["weight"]), coords=coords))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed mixture spec: {exc}") from exc
        return cls(components=comps).validate()

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _plain(params):
    out = {}
    for key, val in params.items():
        if isinstance(val, (list, tuple, np.ndarray)):
            out[key] = [float(x) for x in val]
        else:
            out[key] = float(val)
    return out


def sample_mixture(spec: MixtureSpec, p, seed):
    """Draw p columns; returns (V, labels) with V of shape (n, p)."""
    spec.validate()
    if p < 1:
        raise ConfigError("sample size must be positive")
    n, r = spec.n, spec.r
    labels = stream(seed, LABELS).choice(r, size=p, p=spec.weights)
    V = np.empty((n, p))
    for j, comp in enumerate(spec.components):
        idx = np.flatnonzero(labels == j)
        if idx.size == 0:
            continue
        for i, coord in enumerate(comp.coords):
            V[i, idx] = coord.sample(stream(seed, COORD, j, i), idx.size)
    return V, labels


# ---------------------------------------------------------------------------
# protocol generators


def _protocol_weights(rng, r):
    w = rng.uniform(1.0, 5.0, r)
    return w / w.sum()


def sixty_degree_frame(n, r, rng):
    """Unit columns with pairwise inner product 1/2, random orientation.

    A Haar orthonormal n x r frame composed with the Cholesky factor of the
    target Gram matrix (1/2)(I + ones).
    """
    if r > n:
        raise ConfigError("need r <= n for an orthonormal frame")
    M = rng.standard_normal((n, r))
    Q, R = np.linalg.qr(M)
    Q = Q * np.sign(np.diag(R))
    G = 0.5 * (np.eye(r) + np.ones((r, r)))
    return Q @ np.linalg.cholesky(G).T


def gen_gaussian_protocol(n, r, seed, perturb=0.05):
    """Gaussian components at jittered 60-degree unit means, small sigmas."""
    rng = stream(seed, PARAMS, 0)
    means = sixty_degree_frame(n, r, rng) + perturb * rng.standard_normal((n, r))
    sigma = rng.uniform(1e-3, 0.2, (n, r))
    weights = _protocol_weights(rng, r)
    comps = [
        Component(
            weight=weights[j],
            coords=[
                Coord("gaussian", {"mu": means[i, j], "sigma": sigma[i, j]})
                for i in range(n)
            ],
        )
        for j in range(r)
    ]
    return MixtureSpec(comps).validate()


def gen_ranksel_gaussian(n, r, seed):
    """Gaussian components with standard-normal means and half-normal sigmas."""
    rng = stream(seed, PARAMS, 0)
    means = rng.standard_normal((n, r))
    sigma = np.abs(rng.standard_normal((n, r)))
    weights = _protocol_weights(rng, r)
    comps = [
        Component(
            weight=weights[j],
            coords=[
                Coord("gaussian", {"mu": means[i, j], "sigma": sigma[i, j]})
                for i in range(n)
            ],
        )
        for j in range(r)
    ]
    return MixtureSpec(comps).validate()


def gen_bernoulli_protocol(n, r, seed):
    rng = stream(seed, PARAMS, 0)
    mu = rng.uniform(0.0, 1.0, (n, r))
    weights = _protocol_weights(rng, r)
    comps = [
        Component(
            weight=weights[j],
            coords=[Coord("bernoulli", {"mu": mu[i, j]}) for i in range(n)],
        )
        for j in range(r)
    ]
    return MixtureSpec(comps).validate()


def gen_gamma_protocol(n, r, seed):
    rng = stream(seed, PARAMS, 0)
    theta = rng.uniform(0.1, 5.0, (n, r))
    shape = rng.uniform(1.0, 5.0, (n, r))
    weights = _protocol_weights(rng, r)
    comps = [
        Component(
            weight=weights[j],
            coords=[
                Coord("gamma", {"shape": shape[i, j], "scale": theta[i, j]})
                for i in range(n)
            ],
        )
        for j in range(r)
    ]
    return MixtureSpec(comps).validate()


def gen_heterogeneous_protocol(r, seed, block=10):
    """Four stacked coordinate blocks: Bernoulli, discrete on
    {1..5}, Gaussian, Poisson. n = 4 * block."""
    rng = stream(seed, PARAMS, 0)
    weights = _protocol_weights(rng, r)
    mu_b = rng.uniform(0.0, 1.0, (block, r))
    alpha = rng.uniform(0.0, 1.0, (block, r, 5))
    alpha /= alpha.sum(axis=2, keepdims=True)
    mu_g = rng.standard_normal((block, r))
    sigma_g = rng.uniform(0.0, np.sqrt(10.0), (block, r))
    lam = rng.uniform(0.0, 5.0, (block, r))
    comps = []
    for j in range(r):
        coords = []
        coords += [Coord("bernoulli", {"mu": mu_b[i, j]}) for i in range(block)]
        coords += [Coord("discrete", {"alpha": alpha[i, j]}) for i in range(block)]
        coords += [
            Coord("gaussian", {"mu": mu_g[i, j], "sigma": sigma_g[i, j]})
            for i in range(block)
        ]
        coords += [Coord("poisson", {"lam": lam[i, j]}) for i in range(block)]
        comps.append(Component(weight=weights[j], coords=coords))
    return MixtureSpec(comps).validate()


def synth_smooth_images(side, r, seed, bumps=3):
    """Smooth nonnegative r x side^2 rate images: sums of Gaussian bumps."""
    rng = stream(seed, PARAMS, 1)
    yy, xx = np.mgrid[0:side, 0:side]
    images = np.empty((r, side * side))
    for j in range(r):
        img = np.zeros((side, side))
        for _ in range(bumps):
            cx, cy = rng.uniform(0, side - 1, 2)
            amp = rng.uniform(1.0, 5.0)
            width = rng.uniform(side / 6.0, side / 3.0)
            img += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width**2))
        images[j] = img.ravel()
    return images


def gen_poisson_image_protocol(images, seed):
    """Poisson coordinates with user-supplied nonnegative rate images.

    images: (r, n) array, one flattened mean image per component.
    """
    images = np.asarray(images, dtype=float)
    if images.ndim != 2:
        raise ConfigError("images must be an (r, n) array")
    if np.any(images < 0):
        raise ConfigError("Poisson rate images must be nonnegative")
    rng = stream(seed, PARAMS, 0)
    r, n = images.shape
    weights = _protocol_weights(rng, r)
    comps = [
        Component(
            weight=weights[j],
            coords=[Coord("poisson", {"lam": images[j, i]}) for i in range(n)],
        )
        for j in range(r)
    ]
    return MixtureSpec(comps).validate()


PROTOCOLS = {
    "gaussian": lambda n, r, seed: gen_gaussian_protocol(n, r, seed),
    "ranksel-gaussian": lambda n, r, seed: gen_ranksel_gaussian(n, r, seed),
    "bernoulli": lambda n, r, seed: gen_bernoulli_protocol(n, r, seed),
    "gamma": lambda n, r, seed: gen_gamma_protocol(n, r, seed),
    "heterogeneous": lambda n, r, seed: _heterogeneous_checked(n, r, seed),
}


def _heterogeneous_checked(n, r, seed):
    if n % 4 != 0:
        raise ConfigError("heterogeneous protocol needs n divisible by 4")
    return gen_heterogeneous_protocol(r, seed, block=n // 4)
