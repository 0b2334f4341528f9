"""Hierarchical bivariate-normal model for one landmark/group cell.

Observations ``(x_i, y_i)`` are i.i.d. bivariate normal with parameters
``theta = (mu_x, mu_y, sigma_x, sigma_y, rho)``.  The likelihood is evaluated
as the marginal of ``x`` times the conditional of ``y`` given ``x``.  Priors:

* ``mu_x ~ N(m_x, 1/t_x)`` with ``m_x ~ N(0, V_mu)`` and ``t_x ~ U(0, 1)``
  (same for ``y``);
* ``sigma_x ~ Gamma(a_x, rate=b_x)`` with ``a_x ~ U(0, 0.5)``, ``b_x ~ U(0, 1)``
  (same for ``y``);
* ``rho ~ N(m_rho, 1/t_rho)`` truncated to ``(-1, 1)`` with
  ``m_rho ~ N(0, V_rho)`` and ``t_rho ~ U(0, 1)``.

Sampling is Metropolis-within-Gibbs: conjugate blocks (the mean vector, the
hyper-means, the precisions and the gamma rates) are drawn exactly, the
remaining coordinates by adaptive random-walk Metropolis.  All chains of all
cells are advanced together as one vectorized batch, but every chain reads
its random numbers from its own Philox stream keyed by
``(seed, cell_index, chain_index)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..errors import FitError

__all__ = [
    "HyperConfig",
    "MCMCOptions",
    "ModelParameters",
    "PosteriorDraws",
    "THETA_NAMES",
    "HYPER_NAMES",
    "fit_posterior",
    "fit_cells",
    "gelman_rubin",
    "chain_generator",
]

THETA_NAMES = ("mu_x", "mu_y", "sigma_x", "sigma_y", "rho")
HYPER_NAMES = ("mu_x0", "mu_y0", "sigma_x0", "sigma_y0", "a_x", "b_x", "a_y", "b_y",
               "mu_rho", "sigma_rho")
MH_NAMES = ("sigma_x", "sigma_y", "rho", "a_x", "a_y", "mu_rho", "tau_rho")

_N_NORMAL = 11
_N_UNIFORM = 11
_CHUNK = 512


@dataclass(frozen=True)
class HyperConfig:
    """Hyper-prior settings.

    ``prior_scale`` decides how the second argument of the normal hyper-priors
    ``N(0, mean_prior)`` and ``N(0, rho_mean_prior)`` is read: as a variance
    (default) or as a precision.
    """

    mean_prior: float = 10.0
    rho_mean_prior: float = 2.0
    prior_scale: str = "variance"
    precision_upper: float = 1.0
    shape_upper: float = 0.5
    rate_upper: float = 1.0

    def __post_init__(self):
        if self.prior_scale not in ("variance", "precision"):
            raise ValueError("prior_scale must be 'variance' or 'precision'")
        for name in ("mean_prior", "rho_mean_prior", "precision_upper", "shape_upper",
                     "rate_upper"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def mean_prior_var(self) -> float:
        return self.mean_prior if self.prior_scale == "variance" else 1.0 / self.mean_prior

    @property
    def rho_mean_prior_var(self) -> float:
        if self.prior_scale == "variance":
            return self.rho_mean_prior
        return 1.0 / self.rho_mean_prior

    def to_dict(self) -> dict:
        return {
            "mean_prior": self.mean_prior,
            "rho_mean_prior": self.rho_mean_prior,
            "prior_scale": self.prior_scale,
            "precision_upper": self.precision_upper,
            "shape_upper": self.shape_upper,
            "rate_upper": self.rate_upper,
        }


@dataclass(frozen=True)
class MCMCOptions:
    """Sampler settings; ``draws`` counts post-burn-in iterations per chain."""

    chains: int = 4
    burn_in: int = 5000
    draws: int = 20000
    thin: int = 4
    adapt_every: int = 100
    target_acceptance: tuple = (0.2, 0.4)
    min_kept: int = 100

    def __post_init__(self):
        if self.chains < 1 or self.burn_in < 0 or self.draws < 1 or self.thin < 1:
            raise ValueError("chains, draws and thin must be positive; burn_in non-negative")
        if self.draws // self.thin < self.min_kept:
            raise ValueError(
                f"draws/thin keeps {self.draws // self.thin} samples, below min_kept={self.min_kept}"
            )

    @property
    def kept(self) -> int:
        return self.draws // self.thin

    def to_dict(self) -> dict:
        return {
            "chains": self.chains,
            "burn_in": self.burn_in,
            "draws": self.draws,
            "thin": self.thin,
            "adapt_every": self.adapt_every,
            "target_acceptance": list(self.target_acceptance),
            "min_kept": self.min_kept,
        }


@dataclass(frozen=True)
class ModelParameters:
    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    rho: float

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ValueError("standard deviations must be positive")
        if not abs(self.rho) < 1:
            raise ValueError("correlation must lie in (-1, 1)")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, self.rho])

    def covariance(self) -> np.ndarray:
        sx, sy, r = self.sigma_x, self.sigma_y, self.rho
        return np.array([[sx * sx, r * sx * sy], [r * sx * sy, sy * sy]])


@dataclass
class PosteriorDraws:
    """Retained draws for one cell.

    ``theta`` has shape ``(chains, kept, 5)`` in :data:`THETA_NAMES` order and
    ``hyper`` shape ``(chains, kept, 10)`` in :data:`HYPER_NAMES` order.
    """

    theta: np.ndarray
    hyper: np.ndarray | None
    seed: int | None
    cell_index: int
    options: MCMCOptions | None
    acceptance: np.ndarray = field(default_factory=lambda: np.zeros((0, len(MH_NAMES))))
    warnings: list = field(default_factory=list)

    @classmethod
    def from_parameters(cls, params: ModelParameters, count: int = 1000) -> "PosteriorDraws":
        """A posterior concentrated at a single parameter value."""
        theta = np.tile(params.as_array(), (1, count, 1))
        return cls(theta=theta, hyper=None, seed=None, cell_index=0, options=None)

    @property
    def flat(self) -> np.ndarray:
        """Draws pooled across chains, shape ``(chains * kept, 5)``."""
        return self.theta.reshape(-1, self.theta.shape[-1])

    def posterior_mean(self) -> ModelParameters:
        return ModelParameters(*self.flat.mean(axis=0))

    def psrf(self) -> np.ndarray:
        """Potential scale reduction factor for each of the five parameters."""
        return np.array([gelman_rubin(self.theta[:, :, k]) for k in range(self.theta.shape[-1])])

    def metadata(self) -> dict:
        out = {
            "cell_index": self.cell_index,
            "seed": self.seed,
            "chains": int(self.theta.shape[0]),
            "kept_per_chain": int(self.theta.shape[1]),
            "warnings": list(self.warnings),
        }
        if self.acceptance.size:
            out["acceptance"] = {
                name: [float(v) for v in self.acceptance[:, k]] for k, name in enumerate(MH_NAMES)
            }
        if self.theta.shape[0] > 1:
            out["psrf"] = {name: float(v) for name, v in zip(THETA_NAMES, self.psrf())}
        return out


def gelman_rubin(chains) -> float:
    """Potential scale reduction factor for a ``(n_chains, n_draws)`` array."""
    chains = np.asarray(chains, dtype=float)
    n_chains, n = chains.shape
    if n_chains < 2 or n < 2:
        raise ValueError("need at least two chains with two draws each")
    within = chains.var(axis=1, ddof=1).mean()
    between = n * chains.mean(axis=1).var(ddof=1)
    if within == 0:
        return 1.0 if between == 0 else math.inf
    pooled = (n - 1) / n * within + between / n
    return float(math.sqrt(pooled / within))


def chain_generator(seed: int, cell_index: int, stream: int) -> np.random.Generator:
    """Independent counter-based generator for one (cell, chain) unit."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(int(cell_index), int(stream)))
    return np.random.Generator(np.random.Philox(seq))


def _sufficient_stats(rows):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != 2:
        raise FitError(f"expected an (m, 2) sample, got shape {rows.shape}")
    if rows.shape[0] < 2:
        raise FitError("at least two observations are required")
    if not np.all(np.isfinite(rows)):
        raise FitError("sample contains non-finite values")
    if np.any(rows.std(axis=0) <= 1e-12 * (1 + np.abs(rows).max())):
        raise FitError("sample has a zero-variance column")
    x, y = rows[:, 0], rows[:, 1]
    return np.array([len(x), x.sum(), y.sum(), (x * x).sum(), (y * y).sum(), (x * y).sum()])


def _truncated_gamma_unit(shape, rate, upper, u):
    """Inverse-CDF draw from Gamma(shape, rate) restricted to (0, upper)."""
    rate = np.maximum(rate, 0.0)
    small = rate * upper < 1e-10
    safe = np.where(small, 1.0, rate)
    p_max = special.gammainc(shape, safe * upper)
    draw = special.gammaincinv(shape, u * p_max) / safe
    # for a vanishing rate the density is proportional to t^(shape-1) on (0, upper)
    flat = upper * u ** (1.0 / shape)
    out = np.where(small, flat, draw)
    return np.clip(out, 1e-300, upper)


def _log_rho_normaliser(m, tau):
    s = np.sqrt(tau)
    z = special.ndtr((1 - m) * s) - special.ndtr((-1 - m) * s)
    return np.log(np.maximum(z, 1e-300))


class _Batch:
    """State for ``B`` chains advanced in lock-step."""

    def __init__(self, stats, hyper_cfg, seeds, cells, chains):
        self.cfg = hyper_cfg
        self.n, self.sx, self.sy, self.sxx, self.syy, self.sxy = stats.T
        self.gens = [chain_generator(s, c, k) for s, c, k in zip(seeds, cells, chains)]
        b = len(self.gens)
        init = np.stack([g.standard_normal(4) for g in self.gens])
        n = self.n
        mx, my = self.sx / n, self.sy / n
        vx = np.maximum(self.sxx / n - mx * mx, 1e-12)
        vy = np.maximum(self.syy / n - my * my, 1e-12)
        cxy = self.sxy / n - mx * my
        sdx, sdy = np.sqrt(vx), np.sqrt(vy)
        self.mu_x = mx + 0.1 * sdx * init[:, 0]
        self.mu_y = my + 0.1 * sdy * init[:, 1]
        self.sig_x = sdx * np.exp(0.1 * init[:, 2])
        self.sig_y = sdy * np.exp(0.1 * init[:, 3])
        self.rho = np.clip(cxy / (sdx * sdy), -0.9, 0.9)
        self.m_x = self.mu_x.copy()
        self.m_y = self.mu_y.copy()
        self.t_x = np.full(b, 0.5 * hyper_cfg.precision_upper)
        self.t_y = self.t_x.copy()
        self.a_x = np.full(b, 0.5 * hyper_cfg.shape_upper)
        self.a_y = self.a_x.copy()
        self.b_x = np.full(b, 0.5 * hyper_cfg.rate_upper)
        self.b_y = self.b_x.copy()
        self.m_rho = self.rho.copy()
        self.t_rho = np.full(b, 0.5 * hyper_cfg.precision_upper)
        self.log_scale = np.log(np.tile([0.2, 0.2, 0.1, 0.1, 0.1, 0.5, 0.2], (b, 1)))
        self.accepts = np.zeros((b, len(MH_NAMES)))
        self._buf_n = None
        self._buf_u = None
        self._pos = _CHUNK

    def _randoms(self):
        if self._pos >= _CHUNK:
            self._buf_n = np.stack([g.standard_normal((_CHUNK, _N_NORMAL)) for g in self.gens],
                                   axis=1)
            self._buf_u = np.stack([g.random((_CHUNK, _N_UNIFORM)) for g in self.gens], axis=1)
            self._pos = 0
        z, u = self._buf_n[self._pos], self._buf_u[self._pos]
        self._pos += 1
        return z, u

    def loglik(self, sig_x, sig_y, rho):
        n = self.n
        mx, my = self.mu_x, self.mu_y
        sxx = self.sxx - 2 * mx * self.sx + n * mx * mx
        syy = self.syy - 2 * my * self.sy + n * my * my
        sxy = self.sxy - mx * self.sy - my * self.sx + n * mx * my
        # marginal of x times conditional of y | x
        beta = rho * sig_y / sig_x
        cond_var = sig_y * sig_y * (1 - rho * rho)
        marginal = -n * np.log(sig_x) - sxx / (2 * sig_x * sig_x)
        resid = syy - 2 * beta * sxy + beta * beta * sxx
        conditional = -0.5 * n * np.log(cond_var) - resid / (2 * cond_var)
        return marginal + conditional

    def _mh(self, k, current, proposal, log_target_cur, log_target_prop, valid, u):
        ratio = np.where(valid, log_target_prop - log_target_cur, -np.inf)
        accept = np.log(np.maximum(u, 1e-300)) < ratio
        self.accepts[:, k] += accept
        return np.where(accept, proposal, current)

    def step(self):
        cfg = self.cfg
        z, u = self._randoms()
        n = self.n

        # (mu_x, mu_y) | rest: exact Gaussian draw
        one_m_r2 = 1 - self.rho**2
        inv_xx = n / (self.sig_x**2 * one_m_r2)
        inv_yy = n / (self.sig_y**2 * one_m_r2)
        inv_xy = -n * self.rho / (self.sig_x * self.sig_y * one_m_r2)
        pa, pd, pc = inv_xx + self.t_x, inv_yy + self.t_y, inv_xy
        xbar, ybar = self.sx / n, self.sy / n
        bx = inv_xx * xbar + inv_xy * ybar + self.t_x * self.m_x
        by = inv_xy * xbar + inv_yy * ybar + self.t_y * self.m_y
        det = pa * pd - pc * pc
        mean_x = (pd * bx - pc * by) / det
        mean_y = (pa * by - pc * bx) / det
        l11 = np.sqrt(pa)
        l21 = pc / l11
        l22 = np.sqrt(np.maximum(pd - l21 * l21, 1e-300))
        v2 = z[:, 1] / l22
        v1 = (z[:, 0] - l21 * v2) / l11
        self.mu_x = mean_x + v1
        self.mu_y = mean_y + v2

        # hyper-means and their precisions: exact draws
        v0 = cfg.mean_prior_var
        for mu, m_attr, t_attr, zi, ui in (
            (self.mu_x, "m_x", "t_x", 2, 0),
            (self.mu_y, "m_y", "t_y", 3, 1),
        ):
            t = getattr(self, t_attr)
            prec = 1.0 / v0 + t
            m_new = t * mu / prec + z[:, zi] / np.sqrt(prec)
            setattr(self, m_attr, m_new)
            setattr(self, t_attr, _truncated_gamma_unit(
                1.5, 0.5 * (mu - m_new) ** 2, cfg.precision_upper, u[:, 7 + ui]))

        scale = np.exp(self.log_scale)

        # sigma_x, sigma_y: random walk on the log scale
        for k, name, a_attr, b_attr in ((0, "sig_x", "a_x", "b_x"), (1, "sig_y", "a_y", "b_y")):
            cur = getattr(self, name)
            prop = cur * np.exp(scale[:, k] * z[:, 4 + k])
            a, b = getattr(self, a_attr), getattr(self, b_attr)
            args_cur = (self.sig_x, self.sig_y, self.rho)
            args_prop = (prop, self.sig_y, self.rho) if k == 0 else (self.sig_x, prop, self.rho)
            # Gamma(a, rate b) prior plus the log-scale Jacobian
            lt_cur = self.loglik(*args_cur) + a * np.log(cur) - b * cur
            lt_prop = self.loglik(*args_prop) + a * np.log(prop) - b * prop
            setattr(self, name, self._mh(k, cur, prop, lt_cur, lt_prop, np.ones_like(cur, bool),
                                         u[:, k]))

        # rho: random walk inside (-1, 1) under the truncated-normal prior
        prop = self.rho + scale[:, 2] * z[:, 6]
        valid = np.abs(prop) < 1
        safe = np.where(valid, prop, 0.0)
        lt_cur = self.loglik(self.sig_x, self.sig_y, self.rho) \
            - 0.5 * self.t_rho * (self.rho - self.m_rho) ** 2
        lt_prop = self.loglik(self.sig_x, self.sig_y, safe) \
            - 0.5 * self.t_rho * (safe - self.m_rho) ** 2
        self.rho = self._mh(2, self.rho, prop, lt_cur, lt_prop, valid, u[:, 2])

        # gamma shapes (random walk on (0, shape_upper)) and rates (exact)
        for k, sig_attr, a_attr, b_attr, zi, ui in (
            (3, "sig_x", "a_x", "b_x", 7, 9),
            (4, "sig_y", "a_y", "b_y", 8, 10),
        ):
            sig = getattr(self, sig_attr)
            a, b = getattr(self, a_attr), getattr(self, b_attr)
            prop = a + scale[:, k] * z[:, zi]
            valid = (prop > 0) & (prop < cfg.shape_upper)
            safe = np.where(valid, prop, a)
            log_b, log_s = np.log(b), np.log(sig)
            lt_cur = a * log_b - special.gammaln(a) + (a - 1) * log_s
            lt_prop = safe * log_b - special.gammaln(safe) + (safe - 1) * log_s
            a = self._mh(k, a, prop, lt_cur, lt_prop, valid, u[:, k])
            setattr(self, a_attr, a)
            setattr(self, b_attr, _truncated_gamma_unit(a + 1, sig, cfg.rate_upper, u[:, ui]))

        # correlation hyper-parameters
        v_rho = cfg.rho_mean_prior_var
        d_cur = (self.rho - self.m_rho) ** 2
        prop = self.m_rho + scale[:, 5] * z[:, 9]
        lt_cur = -self.m_rho**2 / (2 * v_rho) - 0.5 * self.t_rho * d_cur \
            - _log_rho_normaliser(self.m_rho, self.t_rho)
        lt_prop = -prop**2 / (2 * v_rho) - 0.5 * self.t_rho * (self.rho - prop) ** 2 \
            - _log_rho_normaliser(prop, self.t_rho)
        self.m_rho = self._mh(5, self.m_rho, prop, lt_cur, lt_prop, np.ones_like(prop, bool),
                              u[:, 5])

        d = (self.rho - self.m_rho) ** 2
        prop = self.t_rho + scale[:, 6] * z[:, 10]
        valid = (prop > 0) & (prop < cfg.precision_upper)
        safe = np.where(valid, prop, self.t_rho)
        lt_cur = 0.5 * np.log(self.t_rho) - 0.5 * self.t_rho * d \
            - _log_rho_normaliser(self.m_rho, self.t_rho)
        lt_prop = 0.5 * np.log(safe) - 0.5 * safe * d - _log_rho_normaliser(self.m_rho, safe)
        self.t_rho = self._mh(6, self.t_rho, prop, lt_cur, lt_prop, valid, u[:, 6])

    def adapt(self, window, lo, hi):
        rate = self.accepts / window
        self.log_scale += np.where(rate < lo, -0.35, 0.0) + np.where(rate > hi, 0.35, 0.0)
        self.accepts[:] = 0

    def theta(self):
        return np.column_stack([self.mu_x, self.mu_y, self.sig_x, self.sig_y, self.rho])

    def hyper(self):
        return np.column_stack([
            self.m_x, self.m_y, 1 / np.sqrt(self.t_x), 1 / np.sqrt(self.t_y),
            self.a_x, self.b_x, self.a_y, self.b_y, self.m_rho, 1 / np.sqrt(self.t_rho),
        ])


def fit_cells(samples, hyper: HyperConfig | None = None, mcmc: MCMCOptions | None = None,
              seed: int = 0, cell_indices=None, keep_hyper: bool = True) -> list:
    """Fit several independent cells in one vectorized run.

    ``samples`` is a sequence of ``(m, 2)`` arrays (or objects with a ``rows``
    attribute). Cell ``k`` uses random streams keyed by ``cell_indices[k]``.
    """
    hyper = hyper or HyperConfig()
    mcmc = mcmc or MCMCOptions()
    rows = [getattr(s, "rows", s) for s in samples]
    if cell_indices is None:
        cell_indices = list(range(len(rows)))
    if len(cell_indices) != len(rows):
        raise ValueError("one cell index per sample is required")
    stats = []
    for idx, r in zip(cell_indices, rows):
        try:
            stats.append(_sufficient_stats(r))
        except FitError as exc:
            raise FitError(f"cell {idx}: {exc}") from None
    n_cells, n_chains = len(rows), mcmc.chains
    stats = np.repeat(np.array(stats), n_chains, axis=0)
    cells = np.repeat(cell_indices, n_chains)
    chains = np.tile(np.arange(n_chains), n_cells)
    batch = _Batch(stats, hyper, [seed] * len(cells), cells, chains)

    lo, hi = mcmc.target_acceptance
    for it in range(1, mcmc.burn_in + 1):
        batch.step()
        if it % mcmc.adapt_every == 0:
            batch.adapt(mcmc.adapt_every, lo, hi)
    batch.accepts[:] = 0

    kept = mcmc.kept
    theta = np.empty((kept, len(cells), 5))
    hyp = np.empty((kept, len(cells), 10)) if keep_hyper else None
    for it in range(kept * mcmc.thin):
        batch.step()
        if (it + 1) % mcmc.thin == 0:
            j = (it + 1) // mcmc.thin - 1
            theta[j] = batch.theta()
            if keep_hyper:
                hyp[j] = batch.hyper()
    acceptance = batch.accepts / (kept * mcmc.thin)

    out = []
    for c, idx in enumerate(cell_indices):
        sl = slice(c * n_chains, (c + 1) * n_chains)
        acc = acceptance[sl]
        warnings = []
        for k, name in enumerate(MH_NAMES):
            bad = (acc[:, k] < 0.05) | (acc[:, k] > 0.95)
            if np.any(bad):
                warnings.append(f"acceptance rate for {name} outside [0.05, 0.95]")
        out.append(PosteriorDraws(
            theta=np.ascontiguousarray(theta[:, sl].transpose(1, 0, 2)),
            hyper=None if hyp is None else np.ascontiguousarray(hyp[:, sl].transpose(1, 0, 2)),
            seed=seed,
            cell_index=int(idx),
            options=mcmc,
            acceptance=acc,
            warnings=warnings,
        ))
    return out


def fit_posterior(sample, hyper: HyperConfig | None = None, mcmc: MCMCOptions | None = None,
                  seed: int = 0, cell_index: int = 0) -> PosteriorDraws:
    """Sample the posterior of one cell; see the module docstring for the model."""
    return fit_cells([sample], hyper, mcmc, seed, [cell_index])[0]
