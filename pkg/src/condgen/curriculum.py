"""Goal samplers: uniform baseline and an ALP-GMM teacher.

The teacher tracks, per finished episode, the goal that was attempted and a
bounded outcome score.  Absolute learning progress (ALP) of a new episode is
the outcome change against the nearest previously attempted goal.  A
Gaussian mixture is periodically fit over (goal, ALP) vectors, and new goals
are drawn from the goal-marginal of a component chosen proportionally to
its mean ALP, so sampling concentrates where performance is still moving.

Goals are normalized to [0,1] per dimension inside the teacher; everything
it hands out is integer-valued and within bounds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture


@dataclass(frozen=True)
class TaskRecord:
    """One finished episode, in normalized goal coordinates."""

    goal: np.ndarray  # (d,) float64, each coordinate in [0, 1]
    outcome: float  # bounded score in [0, 1]
    timestamp: int  # episode index
    alp: float = 0.0


@dataclass
class GmmModel:
    """Fitted mixture over concatenated (goal dims, alp) vectors."""

    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d+1)
    covariances: np.ndarray  # (k, d+1, d+1)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def n_goal_dims(self) -> int:
        return self.means.shape[1] - 1

    def mean_alp(self) -> np.ndarray:
        return self.means[:, -1]


def _as_bounds(bounds) -> np.ndarray:
    arr = np.asarray(bounds, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2 or np.any(arr[:, 0] > arr[:, 1]):
        raise ValueError("bounds must be an (n, 2) array of low <= high pairs")
    return arr


def sample_uniform(bounds, rng: np.random.Generator) -> np.ndarray:
    """One goal with each coordinate uniform on its inclusive integer range."""
    arr = _as_bounds(bounds)
    return rng.integers(arr[:, 0], arr[:, 1] + 1, dtype=np.int64)


def normalize_goal(goal: np.ndarray, bounds) -> np.ndarray:
    arr = _as_bounds(bounds)
    span = (arr[:, 1] - arr[:, 0]).astype(np.float64)
    out = np.zeros(len(arr), dtype=np.float64)
    nonzero = span > 0
    out[nonzero] = (np.asarray(goal, dtype=np.float64)[nonzero] - arr[nonzero, 0]) / span[nonzero]
    return out


def denormalize_goal(unit: np.ndarray, bounds) -> np.ndarray:
    """Map [0,1] coordinates back to clamped, rounded integer goals."""
    arr = _as_bounds(bounds)
    span = (arr[:, 1] - arr[:, 0]).astype(np.float64)
    raw = arr[:, 0] + np.asarray(unit, dtype=np.float64) * span
    return np.clip(np.rint(raw), arr[:, 0], arr[:, 1]).astype(np.int64)


def compute_alp(history: list[TaskRecord], new: TaskRecord) -> float:
    """|new outcome - outcome of the nearest previous goal|; 0 on empty history.

    Nearest is Euclidean in normalized goal space; distance ties go to the
    most recent record.
    """
    if not history:
        return 0.0
    best: TaskRecord | None = None
    best_dist = math.inf
    for rec in history:
        d = float(np.linalg.norm(rec.goal - new.goal))
        if d < best_dist or (d == best_dist and best is not None and rec.timestamp > best.timestamp):
            best, best_dist = rec, d
    assert best is not None
    return abs(new.outcome - best.outcome)


def fit_gmm(
    records: list[TaskRecord],
    k_range: tuple[int, int] = (2, 5),
    seed: int = 0,
    max_restarts: int = 5,
    max_iter: int = 100,
    tol: float = 1e-4,
) -> GmmModel:
    """EM fit over (goal, alp) rows; component count picked by lowest AIC.

    EM runs one iteration at a time so the monotone lower-bound guarantee
    is checked per iteration; a fit whose bound decreases is discarded as
    degenerate.  Degenerate fits are retried with fresh seeds up to
    max_restarts, then the fit falls back to one component.
    """
    if not records:
        raise ValueError("cannot fit on an empty record list")
    data = np.array([[*rec.goal, rec.alp] for rec in records], dtype=np.float64)

    def try_fit(k: int, restart: int) -> tuple[GaussianMixture, float] | None:
        gm = GaussianMixture(
            n_components=k,
            covariance_type="full",
            max_iter=1,
            warm_start=True,
            random_state=seed * 1000 + k * 10 + restart,
            reg_covar=1e-6,
        )
        prev = -math.inf
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                for _ in range(max_iter):
                    gm.fit(data)
                    bound = float(gm.lower_bound_)
                    if not math.isfinite(bound):
                        return None
                    if bound < prev - 1e-8:
                        # the reg_covar clamp made the M step inexact; the
                        # component is collapsing, treat the fit as degenerate
                        return None
                    if bound - prev < tol:
                        break
                    prev = bound
        except (ValueError, np.linalg.LinAlgError):
            return None
        return gm, float(gm.aic(data))

    def fit_k(k: int) -> tuple[GaussianMixture, float] | None:
        for restart in range(max_restarts):
            result = try_fit(k, restart)
            if result is not None:
                return result
        return None

    lo, hi = k_range
    candidates = [fit_k(k) for k in range(lo, hi + 1)]
    fits = [c for c in candidates if c is not None]
    if not fits:
        fallback = fit_k(1)
        if fallback is None:
            raise RuntimeError("mixture fit failed even with a single component")
        fits = [fallback]
    best = min(fits, key=lambda item: item[1])[0]
    return GmmModel(
        weights=best.weights_.copy(),
        means=best.means_.copy(),
        covariances=best.covariances_.copy(),
    )


def sample_alp_gmm(
    model: GmmModel | None,
    bounds,
    explore_ratio: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw a goal from the high-ALP components; uniform during warm-up/explore.

    Component choice is proportional to mean ALP clipped at zero; if every
    component's mean ALP clips to zero, components are chosen uniformly.
    """
    if model is None or rng.random() < explore_ratio:
        return sample_uniform(bounds, rng)
    alp = np.clip(model.mean_alp(), 0.0, None)
    total = alp.sum()
    if total <= 0:
        probs = np.full(model.n_components, 1.0 / model.n_components)
    else:
        probs = alp / total
    comp = int(rng.choice(model.n_components, p=probs))
    d = model.n_goal_dims
    mean = model.means[comp, :d]
    cov = model.covariances[comp, :d, :d]
    unit = rng.multivariate_normal(mean, cov)
    return denormalize_goal(unit, bounds)


class UniformTeacher:
    """Stateless goal source drawing uniformly within bounds."""

    mode = "uniform"

    def __init__(self, bounds, seed: int | None = None) -> None:
        self.bounds = _as_bounds(bounds)
        self.rng = np.random.default_rng(seed)
        self.episodes = 0

    def propose_goal(self) -> np.ndarray:
        return sample_uniform(self.bounds, self.rng)

    def observe(self, goal: np.ndarray, outcome: float) -> None:
        self.episodes += 1

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {}

    def state_meta(self) -> dict:
        return {"mode": self.mode, "episodes": self.episodes, "rng": self.rng.bit_generator.state}

    def load_state(self, meta: dict, arrays: dict[str, np.ndarray]) -> None:
        self.episodes = int(meta["episodes"])
        self.rng.bit_generator.state = meta["rng"]


class AlpGmmTeacher:
    """Goal source that concentrates sampling where learning progress is high.

    Proposes uniformly for the first ``warmup`` episodes and whenever no
    model is fit yet; first fit happens once ``fit_window`` episodes are
    recorded and repeats every ``refit_every`` episodes over the most
    recent window.
    """

    mode = "alp_gmm"

    def __init__(
        self,
        bounds,
        seed: int | None = None,
        fit_window: int = 250,
        refit_every: int = 50,
        warmup: int = 100,
        k_range: tuple[int, int] = (2, 5),
        explore_ratio: float = 0.2,
        max_restarts: int = 5,
    ) -> None:
        if not 0 <= explore_ratio <= 1:
            raise ValueError("explore_ratio must be in [0, 1]")
        self.bounds = _as_bounds(bounds)
        self.seed = 0 if seed is None else int(seed)
        self.rng = np.random.default_rng(seed)
        self.fit_window = fit_window
        self.refit_every = refit_every
        self.warmup = warmup
        self.k_range = tuple(k_range)
        self.explore_ratio = explore_ratio
        self.max_restarts = max_restarts
        self.history: list[TaskRecord] = []
        self.model: GmmModel | None = None
        self._fits = 0

    def propose_goal(self) -> np.ndarray:
        if len(self.history) < self.warmup or self.model is None:
            return sample_uniform(self.bounds, self.rng)
        return sample_alp_gmm(self.model, self.bounds, self.explore_ratio, self.rng)

    def observe(self, goal: np.ndarray, outcome: float) -> None:
        record = TaskRecord(
            goal=normalize_goal(goal, self.bounds),
            outcome=float(np.clip(outcome, 0.0, 1.0)),
            timestamp=len(self.history),
        )
        alp = compute_alp(self.history, record)
        self.history.append(TaskRecord(record.goal, record.outcome, record.timestamp, alp))
        n = len(self.history)
        if n >= self.fit_window and (n - self.fit_window) % self.refit_every == 0:
            window = self.history[-self.fit_window :]
            self.model = fit_gmm(
                window,
                k_range=self.k_range,
                seed=self.seed + self._fits,
                max_restarts=self.max_restarts,
            )
            self._fits += 1

    @property
    def episodes(self) -> int:
        return len(self.history)

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays: dict[str, np.ndarray] = {}
        if self.history:
            arrays["teacher_goals"] = np.stack([r.goal for r in self.history])
            arrays["teacher_outcomes"] = np.array([r.outcome for r in self.history])
            arrays["teacher_alps"] = np.array([r.alp for r in self.history])
        if self.model is not None:
            arrays["teacher_gmm_weights"] = self.model.weights
            arrays["teacher_gmm_means"] = self.model.means
            arrays["teacher_gmm_covariances"] = self.model.covariances
        return arrays

    def state_meta(self) -> dict:
        return {
            "mode": self.mode,
            "episodes": len(self.history),
            "fits": self._fits,
            "has_model": self.model is not None,
            "rng": self.rng.bit_generator.state,
        }

    def load_state(self, meta: dict, arrays: dict[str, np.ndarray]) -> None:
        self.history = []
        if int(meta["episodes"]) > 0:
            goals = arrays["teacher_goals"]
            outcomes = arrays["teacher_outcomes"]
            alps = arrays["teacher_alps"]
            self.history = [
                TaskRecord(goals[i].copy(), float(outcomes[i]), i, float(alps[i]))
                for i in range(len(outcomes))
            ]
        self.model = None
        if meta.get("has_model"):
            self.model = GmmModel(
                weights=arrays["teacher_gmm_weights"].copy(),
                means=arrays["teacher_gmm_means"].copy(),
                covariances=arrays["teacher_gmm_covariances"].copy(),
            )
        self._fits = int(meta.get("fits", 0))
        self.rng.bit_generator.state = meta["rng"]


def make_teacher(mode: str, bounds, seed: int | None = None, **kwargs):
    if mode == "uniform":
        return UniformTeacher(bounds, seed)
    if mode == "alp_gmm":
        return AlpGmmTeacher(bounds, seed, **kwargs)
    raise ValueError(f"unknown teacher mode {mode!r}")
