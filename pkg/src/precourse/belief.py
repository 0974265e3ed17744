"""Probabilistic model over SCM weights.

The prior is a Gaussian mixture. Choice feedback enters through a softmax
likelihood over the candidate costs inside each recorded choice set; the
posterior is sampled with an ensemble MCMC scheme whose walkers are split
into two halves that propose stretch moves against each other. Point
estimates average the highest-likelihood particles, and expected costs are
Monte Carlo means over the particle set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core.actions import Intervention
from .core.schema import State
from .core.scm import CausalGraph, ScmWeights, costs_over_particles, intervention_cost_features

DEFAULT_LAMBDA_TEMP = 5.0
DEFAULT_TOP_FRACTION = 0.1
DEFAULT_N_WALKERS = 32
DEFAULT_N_STEPS = 500
DEFAULT_BURN_IN = 0.5
DEFAULT_STRETCH = 2.0
DEFAULT_N_KEEP = 1000


@dataclass(frozen=True)
class MixturePrior:
    """Gaussian mixture over weight vectors; covariances diagonal or full."""

    weights: tuple[float, ...]
    means: tuple[tuple[float, ...], ...]
    covs: tuple[tuple[tuple[float, ...], ...], ...]

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("mixture needs at least one component")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("mixing weights must sum to 1")
        if any(a <= 0 for a in self.weights):
            raise ValueError("mixing weights must be positive")
        m = len(self.means[0])
        if any(len(mu) != m for mu in self.means):
            raise ValueError("component means must share one dimension")
        chols = []
        for cov in self.covs:
            c = np.asarray(cov, dtype=float)
            if c.shape != (m, m):
                raise ValueError("covariance shape must be (m, m)")
            try:
                chols.append(np.linalg.cholesky(c))
            except np.linalg.LinAlgError:
                raise ValueError("covariances must be positive-definite") from None
        object.__setattr__(self, "_chols", tuple(chols))
        object.__setattr__(self, "_means_arr", np.asarray(self.means, dtype=float))

    @property
    def m(self) -> int:
        return len(self.means[0])

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def mean(self) -> np.ndarray:
        alphas = np.asarray(self.weights)
        return alphas @ self._means_arr  # type: ignore[attr-defined]

    def log_density(self, points: np.ndarray) -> np.ndarray:
        """Log mixture density for a batch of points, shape (n, m) -> (n,)."""
        points = np.atleast_2d(points)
        n = points.shape[0]
        comp = np.empty((self.n_components, n))
        for i, (mu, chol) in enumerate(zip(self._means_arr, self._chols)):  # type: ignore[attr-defined]
            diff = points - mu
            z = np.linalg.solve(chol, diff.T)
            quad = (z ** 2).sum(axis=0)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            comp[i] = (math.log(self.weights[i])
                       - 0.5 * (quad + logdet + self.m * math.log(2 * math.pi)))
        peak = comp.max(axis=0)
        return peak + np.log(np.exp(comp - peak).sum(axis=0))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. draws: component by mixing weight, then the Gaussian."""
        comps = rng.choice(self.n_components, size=n, p=np.asarray(self.weights))
        out = np.empty((n, self.m))
        for i in range(self.n_components):
            mask = comps == i
            k = int(mask.sum())
            if k == 0:
                continue
            z = rng.standard_normal((k, self.m))
            out[mask] = self._means_arr[i] + z @ self._chols[i].T  # type: ignore[attr-defined]
        return out

    @classmethod
    def diagonal(cls, weights: Sequence[float], means: Sequence[Sequence[float]],
                 stdevs: Sequence[Sequence[float]]) -> "MixturePrior":
        covs = tuple(tuple(tuple((s[i] ** 2 if i == j else 0.0) for j in range(len(s)))
                           for i in range(len(s)))
                     for s in stdevs)
        return cls(weights=tuple(float(w) for w in weights),
                   means=tuple(tuple(float(x) for x in mu) for mu in means),
                   covs=covs)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights),
                "means": [list(mu) for mu in self.means],
                "covs": [[list(row) for row in cov] for cov in self.covs]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MixturePrior":
        return cls(weights=tuple(data["weights"]),
                   means=tuple(tuple(mu) for mu in data["means"]),
                   covs=tuple(tuple(tuple(row) for row in cov) for cov in data["covs"]))


@dataclass(frozen=True)
class ChoiceRecord:
    """One elicitation round: the full choice set, the pick, and the state
    the candidates were generated from."""

    state: State
    interventions: tuple[Intervention, ...]
    chosen: int
    phis: tuple[np.ndarray, ...] = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (0 <= self.chosen < len(self.interventions)):
            raise ValueError("chosen index outside the choice set")

    @classmethod
    def build(cls, state: State, interventions: Sequence[Intervention], chosen: int,
              graph: CausalGraph) -> "ChoiceRecord":
        phis = tuple(intervention_cost_features(iv, state, graph) for iv in interventions)
        return cls(state=state, interventions=tuple(interventions), chosen=chosen, phis=phis)

    def costs(self, particles: np.ndarray) -> np.ndarray:
        """(k, n) candidate costs under each particle."""
        return np.stack([costs_over_particles(phi, particles) for phi in self.phis])


@dataclass(frozen=True)
class ElicitationDataset:
    """Ordered choice records accumulated over a session."""

    records: tuple[ChoiceRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: ChoiceRecord) -> "ElicitationDataset":
        return ElicitationDataset(records=self.records + (record,))


def choice_log_likelihood(dataset: ElicitationDataset, weights: ScmWeights | np.ndarray,
                          lam_temp: float) -> float:
    """Log probability of all recorded choices under the softmax response model."""
    w = weights.array if isinstance(weights, ScmWeights) else np.asarray(weights, dtype=float)
    return float(log_likelihood_batch(dataset, w.reshape(1, -1), lam_temp)[0])


def log_likelihood_batch(dataset: ElicitationDataset, particles: np.ndarray,
                         lam_temp: float) -> np.ndarray:
    """Per-particle choice log-likelihood, shape (n,). Empty dataset -> zeros."""
    if lam_temp < 0:
        raise ValueError("temperature must be nonnegative")
    total = np.zeros(particles.shape[0])
    for record in dataset.records:
        utilities = -lam_temp * record.costs(particles)  # (k, n)
        peak = utilities.max(axis=0)
        log_z = peak + np.log(np.exp(utilities - peak).sum(axis=0))
        total += utilities[record.chosen] - log_z
    return total


@dataclass(frozen=True)
class ParticleSet:
    """Weighted posterior draws with their data log-likelihoods."""

    particles: np.ndarray  # (n, m)
    log_likelihoods: np.ndarray  # (n,)
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        p = np.atleast_2d(np.asarray(self.particles, dtype=float))
        ll = np.asarray(self.log_likelihoods, dtype=float)
        if p.shape[0] != ll.shape[0] or p.shape[0] < 1:
            raise ValueError("particles and log-likelihoods must align and be non-empty")
        p.setflags(write=False)
        ll.setflags(write=False)
        object.__setattr__(self, "particles", p)
        object.__setattr__(self, "log_likelihoods", ll)

    def __len__(self) -> int:
        return self.particles.shape[0]

    @property
    def m(self) -> int:
        return self.particles.shape[1]

    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)


def prior_sample(prior: MixturePrior, n: int, seed: int) -> ParticleSet:
    """i.i.d. prior draws; log-likelihood is 0 everywhere (no data)."""
    if n < 1:
        raise ValueError("need at least one particle")
    rng = np.random.default_rng(seed)
    particles = prior.sample(n, rng)
    return ParticleSet(particles=particles, log_likelihoods=np.zeros(n),
                       diagnostics={"source": "prior", "seed": seed})


def posterior_sample(prior: MixturePrior, dataset: ElicitationDataset, lam_temp: float,
                     n_walkers: int = DEFAULT_N_WALKERS, n_steps: int = DEFAULT_N_STEPS,
                     seed: int = 0, *, burn_in: float = DEFAULT_BURN_IN,
                     stretch: float = DEFAULT_STRETCH,
                     n_keep: int | None = DEFAULT_N_KEEP) -> ParticleSet:
    """Ensemble MCMC on log posterior = choice log-likelihood + log prior.

    The walker ensemble is split into two halves; each half proposes
    stretch moves against positions drawn from the other half, which keeps
    the move distribution valid while allowing batched updates. Burn-in is
    discarded; the retained draws are evenly thinned to `n_keep`.
    """
    if n_walkers < 4 or n_walkers % 2 != 0:
        raise ValueError("n_walkers must be even and at least 4")
    if not 0 <= burn_in < 1:
        raise ValueError("burn_in must be in [0, 1)")
    if stretch <= 1:
        raise ValueError("stretch parameter must exceed 1")
    rng = np.random.default_rng(seed)
    m = prior.m

    def log_lik(points: np.ndarray) -> np.ndarray:
        return log_likelihood_batch(dataset, points, lam_temp)

    def log_post(points: np.ndarray, lik: np.ndarray) -> np.ndarray:
        return lik + prior.log_density(points)

    walkers = prior.sample(n_walkers, rng)
    lik = log_lik(walkers)
    logp = log_post(walkers, lik)
    if not np.any(np.isfinite(logp)):
        raise ValueError("posterior is non-finite at every initial walker")

    half = n_walkers // 2
    halves = (np.arange(half), np.arange(half, n_walkers))
    burn_steps = int(burn_in * n_steps)
    kept_particles: list[np.ndarray] = []
    kept_lik: list[np.ndarray] = []
    accepted = 0
    proposed = 0

    for step in range(n_steps):
        for active, other in ((halves[0], halves[1]), (halves[1], halves[0])):
            partners = other[rng.integers(0, half, size=half)]
            u = rng.random(half)
            z = ((stretch - 1.0) * u + 1.0) ** 2 / stretch
            proposal = walkers[partners] + z[:, None] * (walkers[active] - walkers[partners])
            prop_lik = log_lik(proposal)
            prop_logp = log_post(proposal, prop_lik)
            log_accept = (m - 1) * np.log(z) + prop_logp - logp[active]
            accept = np.log(rng.random(half)) < log_accept
            idx = active[accept]
            walkers[idx] = proposal[accept]
            lik[idx] = prop_lik[accept]
            logp[idx] = prop_logp[accept]
            accepted += int(accept.sum())
            proposed += half
        if step >= burn_steps:
            kept_particles.append(walkers.copy())
            kept_lik.append(lik.copy())

    particles = np.concatenate(kept_particles, axis=0)
    lls = np.concatenate(kept_lik, axis=0)
    if n_keep is not None and n_keep < particles.shape[0]:
        idx = np.linspace(0, particles.shape[0] - 1, n_keep).round().astype(int)
        particles = particles[idx]
        lls = lls[idx]
    diagnostics = {"acceptance_rate": accepted / proposed, "n_walkers": n_walkers,
                   "n_steps": n_steps, "burn_in_steps": burn_steps, "seed": seed}
    return ParticleSet(particles=particles, log_likelihoods=lls, diagnostics=diagnostics)


def point_estimate(particles: ParticleSet,
                   top_fraction: float = DEFAULT_TOP_FRACTION) -> ScmWeights:
    """Mean of the top fraction of particles ranked by data log-likelihood.

    With no data every likelihood ties, and the estimate reduces to the
    full-sample mean (the prior expectation when sampling the prior).
    """
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must be in (0, 1]")
    lls = particles.log_likelihoods
    if np.all(lls == lls[0]):
        return ScmWeights.from_array(particles.mean())
    count = math.ceil(top_fraction * len(particles))
    order = np.argsort(-lls, kind="stable")[:count]
    return ScmWeights.from_array(particles.particles[order].mean(axis=0))


def expected_action_cost(phi: np.ndarray, particles: ParticleSet) -> float:
    """Monte Carlo expected cost for one action coefficient vector."""
    per = np.maximum(0.0, particles.particles @ phi)
    return float(per.mean())


def expected_intervention_cost(intervention: Intervention, state: State,
                               particles: ParticleSet, graph: CausalGraph) -> float:
    """Mean clamped intervention cost over the particle set."""
    phi = intervention_cost_features(intervention, state, graph)
    return float(costs_over_particles(phi, particles.particles).mean())
