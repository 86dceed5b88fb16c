"""Variance-preserving diffusion with closed-form scores and energy guidance.

The forward process is the variance-preserving SDE
``dx = -0.5 beta(t) x dt + sqrt(beta(t)) dw`` with a linear noise schedule
``beta(t) = beta_min + t (beta_max - beta_min)`` on t in [0, 1]. Its
perturbation kernel is Gaussian with mean factor

    m(t) = exp(-0.25 t^2 (beta_max - beta_min) - 0.5 t beta_min)

and variance ``v(t) = 1 - m(t)^2``.

Instead of a trained network, scores come from providers with closed forms:
an isotropic Gaussian data distribution, or the exact mixture score of a
finite image dataset. Reverse sampling is Euler-Maruyama with an optional
energy-gradient term subtracted from the score inside the drift; DDIM gives
the deterministic counterpart plus inversion, which together implement
geometry-preserving relighting.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .ccr import extract_ccr
from .energy import EnergyBreakdown, GuidanceConfig, energy_value_and_grad
from .errors import ParameterError, SamplingDivergence, ShapeError
from .illum import LightPrompt, compose_prompt
from .imgcore import as_image

log = logging.getLogger(__name__)

# Per-step cap on the guidance gradient norm, in units of sqrt(dimension).
GRAD_CLIP_FACTOR = 10.0


@dataclass(frozen=True)
class VpSchedule:
    """Linear-beta variance-preserving schedule with its closed-form kernel."""

    beta_min: float = 0.1
    beta_max: float = 20.0
    steps: int = 200

    def __post_init__(self):
        if self.beta_min <= 0:
            raise ParameterError(f"beta_min must be positive, got {self.beta_min}")
        if self.beta_max < self.beta_min:
            raise ParameterError("beta_max must be >= beta_min")
        if self.steps < 0:
            raise ParameterError(f"steps must be non-negative, got {self.steps}")

    def beta(self, t: float) -> float:
        return self.beta_min + t * (self.beta_max - self.beta_min)

    def mean_factor(self, t: float) -> float:
        """m(t): the surviving fraction of the clean signal at time t."""
        return math.exp(
            -0.25 * t * t * (self.beta_max - self.beta_min) - 0.5 * t * self.beta_min
        )

    def variance(self, t: float) -> float:
        """v(t): the perturbation kernel variance, 1 - m(t)^2."""
        m = self.mean_factor(t)
        return 1.0 - m * m

    def as_dict(self) -> dict:
        return {"beta_min": self.beta_min, "beta_max": self.beta_max, "steps": self.steps}


def _check_time(t: float, allow_zero: bool):
    lo = 0.0 if allow_zero else 0.0
    if not (lo <= t <= 1.0) or (not allow_zero and t == 0.0):
        kind = "[0, 1]" if allow_zero else "(0, 1]"
        raise ParameterError(f"time must lie in {kind}, got {t}")


class ScoreProvider:
    """Source of the marginal log-density gradient of the forward process."""

    def score(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError


class GaussianScore(ScoreProvider):
    """Exact score when the data distribution is N(mean, var * I).

    The time-t marginal is N(m(t) mean, (m(t)^2 var + v(t)) I), so the score
    is affine in x.
    """

    def __init__(self, mean: np.ndarray, var: float, schedule: VpSchedule):
        self.mean = np.asarray(mean, dtype=np.float64)
        if var <= 0:
            raise ParameterError(f"data variance must be positive, got {var}")
        self.var = float(var)
        self.schedule = schedule

    def score(self, x: np.ndarray, t: float) -> np.ndarray:
        _check_time(t, allow_zero=False)
        a = np.asarray(x, dtype=np.float64)
        if a.shape != self.mean.shape:
            raise ShapeError(f"shape {a.shape} != data shape {self.mean.shape}")
        m = self.schedule.mean_factor(t)
        total_var = m * m * self.var + self.schedule.variance(t)
        return (m * self.mean - a) / total_var


class EmpiricalScore(ScoreProvider):
    """Exact score of the diffusion of a finite image set.

    The time-t marginal of a dataset {x_i} is the equal-weight mixture
    (1/N) sum_i N(m(t) x_i, v(t) I); its score is the softmax-weighted sum
    of per-component pulls (m(t) x_i - x) / v(t), computed with a stable
    log-sum-exp.
    """

    def __init__(self, images, schedule: VpSchedule):
        images = list(images)
        if not images:
            raise ParameterError("the dataset must contain at least one image")
        first = np.asarray(images[0], dtype=np.float64)
        self.image_shape = first.shape
        flat = np.empty((len(images), first.size), dtype=np.float64)
        for i, img in enumerate(images):
            a = np.asarray(img, dtype=np.float64)
            if a.shape != self.image_shape:
                raise ShapeError(
                    f"dataset image {i} has shape {a.shape}, expected {self.image_shape}"
                )
            flat[i] = a.ravel()
        self._flat = flat
        self.schedule = schedule

    def __len__(self) -> int:
        return self._flat.shape[0]

    def _pulls(self, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, float]:
        a = np.asarray(x, dtype=np.float64)
        if a.shape != self.image_shape:
            raise ShapeError(f"shape {a.shape} != dataset shape {self.image_shape}")
        m = self.schedule.mean_factor(t)
        v = self.schedule.variance(t)
        diffs = m * self._flat - a.reshape(1, -1)
        sq = np.einsum("nd,nd->n", diffs, diffs)
        return diffs, -sq / (2.0 * v), v

    def score(self, x: np.ndarray, t: float) -> np.ndarray:
        _check_time(t, allow_zero=False)
        diffs, logits, v = self._pulls(x, t)
        weights = np.exp(logits - logsumexp(logits))
        return (weights @ diffs).reshape(self.image_shape) / v

    def log_density(self, x: np.ndarray, t: float) -> float:
        """Exact log marginal density at time t (normalization included)."""
        _check_time(t, allow_zero=False)
        _, logits, v = self._pulls(x, t)
        d = self._flat.shape[1]
        return float(
            logsumexp(logits)
            - math.log(len(self))
            - 0.5 * d * math.log(2.0 * math.pi * v)
        )


def perturb(
    x0: np.ndarray, t: float, schedule: VpSchedule, rng: np.random.Generator
) -> np.ndarray:
    """Draw from the perturbation kernel: m(t) x0 + sqrt(v(t)) z."""
    _check_time(t, allow_zero=True)
    a = np.asarray(x0, dtype=np.float64)
    m = schedule.mean_factor(t)
    v = schedule.variance(t)
    return m * a + math.sqrt(v) * rng.standard_normal(a.shape)


def tweedie_denoise(
    x: np.ndarray, t: float, provider: ScoreProvider, schedule: VpSchedule
) -> np.ndarray:
    """Posterior-mean estimate of the clean image: (x + v(t) score) / m(t)."""
    _check_time(t, allow_zero=True)
    a = np.asarray(x, dtype=np.float64)
    if t == 0.0:
        return a.copy()
    v = schedule.variance(t)
    m = schedule.mean_factor(t)
    return (a + v * provider.score(a, t)) / m


@dataclass(frozen=True, eq=False)
class SamplerRun:
    """Result of one sampling run: final image plus reproducibility metadata."""

    seed: object
    final: np.ndarray
    energy_trace: tuple | None  # ((t, EnergyBreakdown), ...) when guided
    config: dict
    clipped_steps: int = 0


def _guidance_state(
    x: np.ndarray,
    t: float,
    score_value: np.ndarray,
    schedule: VpSchedule,
    guidance: GuidanceConfig,
    clip_cap: float,
) -> tuple[np.ndarray, EnergyBreakdown, bool]:
    """Energy gradient (in sample space) and breakdown at the configured point."""
    if guidance.eval_point == "on_denoised":
        m = schedule.mean_factor(t)
        v = schedule.variance(t)
        x_eval = (x + v * score_value) / m
        # Chain rule through the affine part of the denoiser only; the
        # score Jacobian is dropped, as is standard for guided sampling.
        chain = 1.0 / m
    else:
        x_eval = x
        chain = 1.0
    breakdown, grad = energy_value_and_grad(x_eval, guidance)
    grad = chain * grad
    norm = float(np.linalg.norm(grad))
    clipped = norm > clip_cap
    if clipped:
        grad *= clip_cap / norm
        log.debug("guidance gradient clipped at t=%.4f (norm %.3g)", t, norm)
    return grad, breakdown, clipped


def reverse_sample_guided(
    provider: ScoreProvider,
    schedule: VpSchedule,
    shape: tuple,
    seed,
    guidance: GuidanceConfig | None = None,
) -> SamplerRun:
    """Euler-Maruyama reverse sampling from t=1 to t=0, optionally guided.

    Each step from time s to s - h updates
    ``x <- x - [-0.5 beta(s) x - beta(s) (score - grad_E)] h + sqrt(beta(s) h) z``
    with no noise on the final step. The energy gradient is evaluated at the
    sample or at its denoised estimate per the guidance config, and is
    clipped to an L2 norm of ``10 sqrt(D)`` to keep early high-noise steps
    stable. Identical inputs and seed reproduce the run bitwise.
    """
    if schedule.steps < 1:
        raise ParameterError("the SDE sampler needs at least one step")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    active = guidance is not None and guidance.active
    trace: list | None = [] if active else None
    clip_cap = GRAD_CLIP_FACTOR * math.sqrt(x.size)
    clipped_steps = 0
    n = schedule.steps
    h = 1.0 / n
    for k in range(n):
        s = 1.0 - k * h
        beta = schedule.beta(s)
        score_value = provider.score(x, s)
        drift_score = score_value
        if active:
            grad, breakdown, clipped = _guidance_state(
                x, s, score_value, schedule, guidance, clip_cap
            )
            trace.append((s, breakdown))
            clipped_steps += int(clipped)
            drift_score = score_value - grad
        x = x - (-0.5 * beta * x - beta * drift_score) * h
        if k < n - 1:
            x = x + math.sqrt(beta * h) * rng.standard_normal(shape)
        if not np.all(np.isfinite(x)):
            raise SamplingDivergence(
                "non-finite sample; reduce guidance weights or increase steps", step=k
            )
    return SamplerRun(
        seed=seed,
        final=x,
        energy_trace=tuple(trace) if active else None,
        config={
            "sampler": "sde",
            "schedule": schedule.as_dict(),
            "shape": list(shape),
            "guided": active,
        },
        clipped_steps=clipped_steps,
    )


def _ddim_generate(
    provider: ScoreProvider,
    schedule: VpSchedule,
    x_start: np.ndarray,
    guidance: GuidanceConfig | None,
) -> tuple[np.ndarray, list, int]:
    n = schedule.steps
    x = np.array(x_start, dtype=np.float64, copy=True)
    active = guidance is not None and guidance.active
    trace: list = []
    clip_cap = GRAD_CLIP_FACTOR * math.sqrt(x.size)
    clipped_steps = 0
    for k in range(n, 0, -1):
        t = k / n
        t_prev = (k - 1) / n
        m_t = schedule.mean_factor(t)
        v_t = schedule.variance(t)
        score_value = provider.score(x, t)
        effective = score_value
        if active:
            grad, breakdown, clipped = _guidance_state(
                x, t, score_value, schedule, guidance, clip_cap
            )
            trace.append((t, breakdown))
            clipped_steps += int(clipped)
            effective = score_value - grad
        eps_hat = -math.sqrt(v_t) * effective
        x0_hat = (x - math.sqrt(v_t) * eps_hat) / m_t
        x = schedule.mean_factor(t_prev) * x0_hat + math.sqrt(
            schedule.variance(t_prev)
        ) * eps_hat
        if not np.all(np.isfinite(x)):
            raise SamplingDivergence(
                "non-finite DDIM state; reduce guidance weights", step=n - k
            )
    return x, trace, clipped_steps


def ddim_sample(
    provider: ScoreProvider,
    schedule: VpSchedule,
    x_start: np.ndarray,
    guidance: GuidanceConfig | None = None,
) -> np.ndarray:
    """Deterministic denoising from a latent on the schedule's uniform grid.

    The noise estimate is ``eps = -sqrt(v(t)) * score``; with guidance the
    score is replaced by ``score - grad_E``. The final step lands on the
    clean-image estimate (m(0) = 1, v(0) = 0).
    """
    final, _, _ = _ddim_generate(provider, schedule, x_start, guidance)
    return final


def ddim_invert(
    x0: np.ndarray, provider: ScoreProvider, schedule: VpSchedule
) -> np.ndarray:
    """Run the DDIM update in ascending time to recover a latent.

    The first step starts from clean data where the noise estimate is
    identically zero (v(0) = 0), so it reduces to scaling by m(t_1); later
    steps re-estimate the noise from the score at the current time.
    """
    a = np.asarray(x0, dtype=np.float64)
    n = schedule.steps
    x = a.copy()
    for k in range(n):
        t = k / n
        t_next = (k + 1) / n
        if k == 0:
            eps_hat = np.zeros_like(x)
        else:
            eps_hat = -math.sqrt(schedule.variance(t)) * provider.score(x, t)
        x0_hat = (x - math.sqrt(schedule.variance(t)) * eps_hat) / schedule.mean_factor(t)
        x = schedule.mean_factor(t_next) * x0_hat + math.sqrt(
            schedule.variance(t_next)
        ) * eps_hat
    return x


def relight(
    x0: np.ndarray,
    prompt: LightPrompt,
    provider: ScoreProvider,
    schedule: VpSchedule,
    guidance: GuidanceConfig,
) -> SamplerRun:
    """Geometry-preserving relighting of an image toward a light prompt.

    The illumination target is composed from the prompt and the geometry
    target is the log cross-color-ratio map of the input itself; the image
    is inverted to a latent and regenerated under both guidance terms.
    """
    a = as_image(x0, channels=3)
    h, w = a.shape[:2]
    cfg = replace(
        guidance,
        target_illum=compose_prompt(prompt, (h, w)),
        target_ccr=extract_ccr(a, guidance.ccr),
    )
    latent = ddim_invert(a, provider, schedule)
    final, trace, clipped = _ddim_generate(provider, schedule, latent, cfg)
    return SamplerRun(
        seed=None,
        final=final,
        energy_trace=tuple(trace) if cfg.active else None,
        config={
            "sampler": "ddim-relight",
            "schedule": schedule.as_dict(),
            "shape": list(a.shape),
            "guided": cfg.active,
        },
        clipped_steps=clipped,
    )


def chain_seed(seed: int, chain: int) -> tuple[int, int]:
    """Counter-based RNG key for one chain; independent of execution order."""
    return (int(seed), int(chain))


def sample_chains(
    provider: ScoreProvider,
    schedule: VpSchedule,
    shape: tuple,
    seed: int,
    chains: int,
    guidance: GuidanceConfig | None = None,
    threads: int = 1,
) -> list[SamplerRun]:
    """Run independent guided SDE chains, reproducible regardless of threading."""
    if chains < 1:
        raise ParameterError(f"chain count must be >= 1, got {chains}")
    keys = [chain_seed(seed, k) for k in range(chains)]

    def run(key):
        return reverse_sample_guided(provider, schedule, shape, key, guidance)

    if threads <= 1:
        return [run(key) for key in keys]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, keys))
