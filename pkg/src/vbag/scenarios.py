"""Named simulation scenarios: configuration, data generation and runners.

Each runner returns ``(payload, tables)`` where ``payload`` is the numeric
body of the report and ``tables`` maps CSV file stems to row lists.
Replication ``r`` of a scenario always draws from ``RngStream(seed).child(r)``
(data from its child 0, bootstrap replicates from child 1 and pilot bags
from child 2), so results do not depend on how many workers run them.
"""
from __future__ import annotations

import copy
import functools
import re
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bagging import (
    GaussianCoverageScenario,
    bag,
    bagged_moments,
    correct_covariance,
    coverage_experiment,
    credible_ellipsoid,
    sandwich_covariance,
    SandwichInputs,
)
from .bootstrap import (
    SizeSelectionInputs,
    asymptotic_optimal_size,
    finite_sample_size_details,
)
from .errors import ConfigError, DegenerateSizeWarning, DegenerateVariance, NegativeDiscriminant, ZeroReference
from .models import (
    FitConfig,
    GaussianMeanPrior,
    GmmPrior,
    ObservationSet,
    SpikeSlabPrior,
    coefficient_estimate,
    exact_gaussian_mean_posterior,
    fit_gaussian_mean_mfvb,
    fit_gmm_cavi,
    fit_spike_slab_vb,
    fit_symmetric_mixture_vb,
    symmetric_mixture_asymptotic_var,
    symmetric_mixture_mvle,
)
from .models.symmetric_mixture import sign
from .numerics import RngStream, chi2_quantile
from .parallel import pmap
from .report import make_report

__all__ = [
    "SCENARIOS",
    "SPARSE_VARIANTS",
    "ScenarioConfig",
    "load_config",
    "generate_data",
    "draw_errors",
    "compute_rse",
    "resolve_bootstrap_size",
    "run_scenario",
]

SCENARIOS = ("toy-gaussian", "toy-gaussian-grid", "gmm-misspec", "sparse-reg", "mixture-example", "coverage")
SPARSE_VARIANTS = {"S1": (10, 1000), "S2": (10, 2000), "S3": (20, 1000), "S4": (20, 2000)}

_TOY_HYPER = {"mean": [-1.0, 1.0], "cov": [[1.0, 0.5], [0.5, 1.0]], "prior_precision": 1e-6}
_FIT_HYPER = {"max_iters": 500, "elbo_tol": 1e-6, "variance_floor": 1e-8}
_DEFAULTS = {
    "toy-gaussian": dict(n=500, B=50, M_policy="equals_n", reps=1, error_family="gaussian", hyper=_TOY_HYPER),
    "toy-gaussian-grid": dict(
        n=None,
        B=None,
        M_policy="equals_n",
        reps=1,
        error_family="gaussian",
        n_grid=[50, 100, 200, 300, 500, 1000],
        B_grid=[5, 10, 20, 30, 50],
        hyper=_TOY_HYPER,
    ),
    "gmm-misspec": dict(
        n=500,
        B=50,
        M_policy="eq4",
        reps=20,
        error_family="student_t(3)",
        hyper={
            "K": 2,
            "locations": [-3.0, 3.0],
            "weights": [0.5, 0.5],
            "scale": 1.0,
            "dirichlet_alpha": 1.0,
            "nu0": 10.0,
            "ig_a": 1.0,
            "ig_b": 1.0,
        },
    ),
    "sparse-reg": dict(
        n=1000,
        q=10,
        B=50,
        M_policy="eq4",
        reps=10,
        error_family="student_t(3)",
        hyper={
            "sigma_beta_sq": 10.0,
            "ig_A": 0.1,
            "ig_B": 0.1,
            "p_incl": 0.5,
            "beta_nonzero": [2.0, -1.5, 1.0, 0.5, 0.1],
            "noise_scale": 1.0,
        },
    ),
    "mixture-example": dict(
        n=2000,
        B=50,
        M_policy="equals_n",
        reps=20,
        error_family="laplace",
        hyper={"theta0": 2.0, "scale": 1.0, "prior_precision": 1e-6},
    ),
    "coverage": dict(
        n=200,
        B=30,
        M_policy="equals_n",
        reps=500,
        error_family="gaussian",
        hyper=dict(_TOY_HYPER, shape="bagged"),
    ),
}

_FIELDS = (
    "scenario",
    "n",
    "B",
    "M_policy",
    "seed",
    "level",
    "error_family",
    "hyper",
    "reps",
    "output_path",
    "q",
    "variant",
    "n_grid",
    "B_grid",
    "functional_index",
)


@dataclass
class ScenarioConfig:
    """Fully resolved configuration of one scenario run.

    ``M_policy`` is ``"equals_n"``, ``"eq4"`` (asymptotic size rule),
    ``"fs_opt"`` (finite-sample rule) or ``"fixed(M)"``. ``error_family`` is
    ``"gaussian"``, ``"laplace"`` or ``"student_t(df)"``.
    """

    scenario: str
    n: int | None = None
    B: int | None = None
    M_policy: str = "equals_n"
    seed: int = 0
    level: float = 0.95
    error_family: str = "gaussian"
    hyper: dict = field(default_factory=dict)
    reps: int = 1
    output_path: str = "vbag-out"
    q: int | None = None
    variant: str | None = None
    n_grid: list | None = None
    B_grid: list | None = None
    functional_index: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        unknown = sorted(set(raw) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        name = raw.get("scenario")
        if name not in SCENARIOS:
            raise ConfigError(f"scenario: unknown scenario {name!r}; valid scenarios: {', '.join(SCENARIOS)}")
        merged = copy.deepcopy(_DEFAULTS[name])
        hyper = dict(_FIT_HYPER)
        hyper.update(merged.pop("hyper"))
        user_hyper = raw.get("hyper") or {}
        if not isinstance(user_hyper, dict):
            raise ConfigError("hyper: must be a mapping")
        hyper.update(user_hyper)
        merged.update({k: v for k, v in raw.items() if k != "hyper" and v is not None})
        merged["hyper"] = hyper
        if name == "sparse-reg" and merged.get("variant") is not None:
            if merged["variant"] not in SPARSE_VARIANTS:
                raise ConfigError(f"variant: unknown sparse-regression variant {merged['variant']!r}")
            q, n = SPARSE_VARIANTS[merged["variant"]]
            merged["q"] = raw.get("q", q)
            merged["n"] = raw.get("n", n)
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        def pos_int(name, value):
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name}: must be a positive integer, got {value!r}")

        if self.scenario == "toy-gaussian-grid":
            for name in ("n_grid", "B_grid"):
                vals = getattr(self, name)
                if not vals:
                    raise ConfigError(f"{name}: must be a nonempty list")
                for v in vals:
                    pos_int(name, v)
        else:
            pos_int("n", self.n)
            pos_int("B", self.B)
        pos_int("reps", self.reps)
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {self.seed!r}")
        if not (isinstance(self.level, (int, float)) and 0.0 < self.level < 1.0):
            raise ConfigError(f"level: must lie in (0, 1), got {self.level!r}")
        parse_m_policy(self.M_policy)
        parse_error_family(self.error_family)
        if self.scenario == "sparse-reg":
            pos_int("q", self.q)
            if len(self.hyper.get("beta_nonzero", [])) > self.q:
                raise ConfigError("hyper.beta_nonzero: longer than q")
        if self.scenario == "mixture-example" and self.hyper.get("theta0", 0) < 0:
            raise ConfigError("hyper.theta0: must be nonnegative")
        if not isinstance(self.functional_index, int) or self.functional_index < 0:
            raise ConfigError("functional_index: must be a nonnegative integer")
        try:
            self.fit_config()
        except Exception as exc:
            raise ConfigError(f"hyper: invalid fit settings ({exc})") from None

    def fit_config(self) -> FitConfig:
        h = self.hyper
        return FitConfig(int(h["max_iters"]), float(h["elbo_tol"]), float(h["variance_floor"]), RngStream(self.seed))

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from None
    raw = dict(raw or {})
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    return ScenarioConfig.from_dict(raw)


_FIXED = re.compile(r"^fixed\((\d+)\)$")
_STUDENT = re.compile(r"^student_t\((\d+(?:\.\d+)?)\)$")


def parse_m_policy(policy):
    if isinstance(policy, dict) and set(policy) == {"fixed"}:
        policy = f"fixed({policy['fixed']})"
    if policy in ("equals_n", "eq4", "fs_opt"):
        return policy, None
    m = _FIXED.match(str(policy))
    if m and int(m.group(1)) >= 1:
        return "fixed", int(m.group(1))
    raise ConfigError(f"M_policy: expected equals_n, eq4, fs_opt or fixed(M), got {policy!r}")


def parse_error_family(family):
    if isinstance(family, dict) and set(family) == {"student_t"}:
        family = f"student_t({family['student_t']})"
    if family in ("gaussian", "laplace"):
        return family, None
    if family == "student_t":
        return "student_t", 3.0
    m = _STUDENT.match(str(family))
    if m and float(m.group(1)) > 0:
        return "student_t", float(m.group(1))
    raise ConfigError(f"error_family: expected gaussian, laplace or student_t(df), got {family!r}")


def draw_errors(family, size, gen: np.random.Generator, scale: float = 1.0, standardize: bool = False):
    """Errors from the named family with the given scale.

    With ``standardize`` the draws have unit variance before scaling
    (Student-t then needs ``df > 2``).
    """
    kind, df = parse_error_family(family)
    if kind == "gaussian":
        e = gen.standard_normal(size)
    elif kind == "laplace":
        e = gen.laplace(0.0, 1.0, size)
        if standardize:
            e = e / np.sqrt(2.0)
    else:
        e = gen.standard_t(df, size)
        if standardize:
            if df <= 2:
                raise ConfigError("error_family: standardized Student-t needs df > 2")
            e = e * np.sqrt((df - 2.0) / df)
    return scale * e


def sparse_beta(cfg: ScenarioConfig) -> np.ndarray:
    beta = np.zeros(cfg.q)
    nz = np.asarray(cfg.hyper.get("beta_nonzero", []), dtype=float)
    beta[: nz.size] = nz
    return beta


def generate_data(cfg: ScenarioConfig, rng: RngStream, n: int | None = None) -> ObservationSet:
    """Simulate one dataset for ``cfg`` (``n`` overrides ``cfg.n``)."""
    n = cfg.n if n is None else n
    if n is None or n < 1:
        raise ConfigError(f"n: must be a positive integer, got {n!r}")
    gen = rng.generator()
    h = cfg.hyper
    if cfg.scenario in ("toy-gaussian", "toy-gaussian-grid", "coverage"):
        mean = np.asarray(h["mean"], dtype=float)
        L = np.linalg.cholesky(np.asarray(h["cov"], dtype=float))
        e = draw_errors(cfg.error_family, (n, mean.size), gen, standardize=True)
        return ObservationSet(mean + e @ L.T)
    if cfg.scenario == "gmm-misspec":
        locs = np.asarray(h["locations"], dtype=float)
        wts = np.asarray(h["weights"], dtype=float)
        z = gen.choice(locs.size, size=n, p=wts / wts.sum())
        e = draw_errors(cfg.error_family, n, gen, scale=float(h["scale"]))
        return ObservationSet(locs[z] + e)
    if cfg.scenario == "mixture-example":
        s = np.where(gen.random(n) < 0.5, 1.0, -1.0)
        e = draw_errors(cfg.error_family, n, gen, scale=float(h["scale"]))
        return ObservationSet(s * float(h["theta0"]) + e)
    if cfg.scenario == "sparse-reg":
        X = gen.standard_normal((n, cfg.q))
        e = draw_errors(cfg.error_family, n, gen, scale=float(h["noise_scale"]))
        return ObservationSet(X, X @ sparse_beta(cfg) + e)
    raise ConfigError(f"scenario: unknown scenario {cfg.scenario!r}")


def compute_rse(beta_hat, beta_ols) -> float:
    """Relative squared error ``||beta_hat - beta_ols||^2 / ||beta_ols||^2``."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_ols = np.asarray(beta_ols, dtype=float)
    if beta_hat.shape != beta_ols.shape:
        raise ConfigError("beta_hat and beta_ols differ in length")
    denom = float(beta_ols @ beta_ols)
    if denom == 0.0:
        raise ZeroReference("reference coefficient vector is zero")
    diff = beta_hat - beta_ols
    return float(diff @ diff) / denom


# ---------------------------------------------------------------------------
# model plumbing


def _toy_prior(cfg: ScenarioConfig) -> GaussianMeanPrior:
    lam = np.linalg.inv(np.asarray(cfg.hyper["cov"], dtype=float))
    return GaussianMeanPrior.vague(0.5 * (lam + lam.T), float(cfg.hyper["prior_precision"]))


def _gmm_prior(cfg: ScenarioConfig) -> GmmPrior:
    h = cfg.hyper
    K = int(h["K"])
    return GmmPrior(K, np.broadcast_to(np.asarray(h["dirichlet_alpha"], float), (K,)), h["nu0"], h["ig_a"], h["ig_b"])


def _spike_prior(cfg: ScenarioConfig) -> SpikeSlabPrior:
    h = cfg.hyper
    return SpikeSlabPrior(h["sigma_beta_sq"], h["ig_A"], h["ig_B"], h["p_incl"])


def _fit_spike(data, weights, prior, cfg):
    return fit_spike_slab_vb(data.X, data.y, weights, prior, cfg)


def _fit_symmetric(data, weights, prior_precision, cfg):
    return fit_symmetric_mixture_vb(data, weights, prior_precision, cfg)


def model_for(cfg: ScenarioConfig):
    """``(fit, labels, prior_variance_of_functional)`` for the scenario's model."""
    fc = cfg.fit_config()
    if cfg.scenario in ("toy-gaussian", "toy-gaussian-grid", "coverage"):
        prior = _toy_prior(cfg)
        fit = functools.partial(fit_gaussian_mean_mfvb, prior=prior, cfg=fc)
        return fit, ("mu",), 1.0 / float(cfg.hyper["prior_precision"])
    if cfg.scenario == "gmm-misspec":
        prior = _gmm_prior(cfg)
        fit = functools.partial(fit_gmm_cavi, prior=prior, cfg=fc)
        v0 = prior.nu0 * prior.ig_b / (prior.ig_a - 1.0) if prior.ig_a > 1 else float("inf")
        return fit, ("mu",), v0
    if cfg.scenario == "sparse-reg":
        prior = _spike_prior(cfg)
        return functools.partial(_fit_spike, prior=prior, cfg=fc), ("beta",), prior.sigma_beta_sq
    if cfg.scenario == "mixture-example":
        pp = float(cfg.hyper["prior_precision"])
        return functools.partial(_fit_symmetric, prior_precision=pp, cfg=fc), ("theta",), 1.0 / pp
    raise ConfigError(f"scenario: unknown scenario {cfg.scenario!r}")


def resolve_bootstrap_size(cfg: ScenarioConfig, data: ObservationSet, rng: RngStream, B: int | None = None) -> dict:
    """Apply ``cfg.M_policy`` and return ``M`` with every intermediate quantity."""
    policy, fixed = parse_m_policy(cfg.M_policy)
    n = data.n
    info = {"policy": policy, "M": n}
    if policy == "fixed":
        info["M"] = fixed
        return info
    if policy == "equals_n":
        return info
    fit, labels, v0 = model_for(cfg)
    j = cfg.functional_index
    plain = fit(data, None)
    _, cov = plain.moments(labels)
    if j >= cov.shape[0]:
        raise ConfigError(f"functional_index: {j} out of range for a {cov.shape[0]}-dim parameter")
    pilot = bag(fit, data, B or cfg.B, n, rng, labels=labels)
    _, bcov = bagged_moments(pilot)
    v_n, v_star = float(cov[j, j]), float(bcov[j, j])
    info.update(v_n=v_n, v_n_star=v_star, v0=v0, pilot_discarded=pilot.discarded, fallback=None)
    try:
        if policy == "eq4":
            info["M"] = asymptotic_optimal_size(SizeSelectionInputs(v_n, v_star, n))
        else:
            try:
                det = finite_sample_size_details(SizeSelectionInputs(v_n, v_star, n, v0))
                info.update(M=det.size, sigma_sq=det.sigma_sq, s_sq=det.s_sq, discriminant=det.discriminant)
            except NegativeDiscriminant:
                warnings.warn("negative discriminant; using the asymptotic size", DegenerateSizeWarning)
                info["M"] = asymptotic_optimal_size(SizeSelectionInputs(v_n, v_star, n))
                info["fallback"] = "eq4"
    except DegenerateVariance:
        warnings.warn("bagging added no spread; using M = n", DegenerateSizeWarning)
        info["M"] = n
        info["fallback"] = "equals_n"
    return info


def _convergence(bp, plain=None) -> dict:
    its = [c.iterations for c in bp.components]
    out = {
        "kept": bp.B,
        "discarded": bp.discarded,
        "iterations_min": int(min(its)),
        "iterations_median": float(np.median(its)),
        "iterations_max": int(max(its)),
    }
    if plain is not None:
        out["plain_converged"] = plain.converged
        out["plain_iterations"] = plain.iterations
    return out


def _quartiles(x) -> list:
    return np.quantile(np.asarray(x, dtype=float), [0.25, 0.5, 0.75]).tolist()


# ---------------------------------------------------------------------------
# runners


def _toy_rep(r: int, cfg: ScenarioConfig, n: int | None = None, B: int | None = None) -> dict:
    n = cfg.n if n is None else n
    B = cfg.B if B is None else B
    rng = RngStream(cfg.seed).child(r)
    data = generate_data(cfg, rng.child(0), n)
    fit, labels, _ = model_for(cfg)
    prior = _toy_prior(cfg)
    plain = fit(data, None)
    size = resolve_bootstrap_size(cfg, data, rng.child(2), B)
    bp = bag(fit, data, B, size["M"], rng.child(1), labels=labels)
    mean, cov = bagged_moments(bp)
    corrected = correct_covariance(cov)
    ex_mean, ex_cov = exact_gaussian_mean_posterior(data, prior)
    vb_mean, vb_cov = plain.moments(labels)
    shape = n * cov
    ell = credible_ellipsoid(ex_mean, shape, cfg.level, n)
    d = np.diag_indices_from(cov)
    iu = np.triu_indices_from(cov, 1)
    return {
        "rep": r,
        "n": n,
        "B": B,
        "M": size,
        "c_ratio": bp.c_ratio,
        "convergence": _convergence(bp, plain),
        "exact_mean": ex_mean,
        "exact_cov": ex_cov,
        "vb_mean": vb_mean,
        "vb_cov": vb_cov,
        "bagged_mean": mean,
        "bagged_cov": cov,
        "corrected_cov": corrected,
        "offdiag_rel_err": float(np.mean(np.abs(cov[iu] - ex_cov[iu]) / np.abs(ex_cov[iu]))) if iu[0].size else 0.0,
        "corrected_diag_rel_err": float(np.mean(np.abs(corrected[d] - ex_cov[d]) / ex_cov[d])),
        "ellipsoid": {"center": ell.center, "shape": ell.shape, "radius_sq": ell.radius_sq, "n": n},
    }


def run_toy_gaussian(cfg: ScenarioConfig, workers: int = 1):
    job = functools.partial(_toy_rep, cfg=cfg)
    reps = pmap(job, range(cfg.reps), workers) if cfg.reps > 1 else [_toy_rep(0, cfg)]
    summary = {
        "mean_offdiag_rel_err": float(np.mean([r["offdiag_rel_err"] for r in reps])),
        "mean_corrected_diag_rel_err": float(np.mean([r["corrected_diag_rel_err"] for r in reps])),
    }
    return {"replications": reps, "summary": summary}, {}


def _grid_cell(idx_cell, cfg: ScenarioConfig):
    idx, (n, B) = idx_cell
    rows = []
    for r in range(cfg.reps):
        # one stream per (cell, rep) keeps cells independent and reproducible
        res = _toy_rep(idx * cfg.reps + r, cfg, n=n, B=B)
        rows.append(
            {
                "n": n,
                "B": B,
                "rep": r,
                "M": res["M"]["M"],
                "offdiag_rel_err": res["offdiag_rel_err"],
                "corrected_diag_rel_err": res["corrected_diag_rel_err"],
                "bagged_var_1": res["bagged_cov"][0, 0],
                "bagged_var_2": res["bagged_cov"][1, 1],
                "bagged_cov_12": res["bagged_cov"][0, 1],
                "exact_var_1": res["exact_cov"][0, 0],
                "exact_var_2": res["exact_cov"][1, 1],
                "exact_cov_12": res["exact_cov"][0, 1],
                "discarded": res["convergence"]["discarded"],
            }
        )
    return rows


def run_toy_gaussian_grid(cfg: ScenarioConfig, workers: int = 1):
    cells = list(enumerate((n, B) for n in cfg.n_grid for B in cfg.B_grid))
    rows = [row for cell in pmap(functools.partial(_grid_cell, cfg=cfg), cells, workers) for row in cell]
    summary = []
    for n in cfg.n_grid:
        for B in cfg.B_grid:
            sel = [r for r in rows if r["n"] == n and r["B"] == B]
            summary.append(
                {
                    "n": n,
                    "B": B,
                    "mean_offdiag_rel_err": float(np.mean([r["offdiag_rel_err"] for r in sel])),
                    "mean_corrected_diag_rel_err": float(np.mean([r["corrected_diag_rel_err"] for r in sel])),
                }
            )
    return {"cells": summary}, {"grid": rows}


def _gmm_rep(r: int, cfg: ScenarioConfig) -> dict:
    rng = RngStream(cfg.seed).child(r)
    data = generate_data(cfg, rng.child(0))
    fit, labels, _ = model_for(cfg)
    plain = fit(data, None)
    ref_cfg = FitConfig(max(cfg.fit_config().max_iters, 5000), 1e-10, cfg.fit_config().variance_floor)
    reference = fit_gmm_cavi(data, None, _gmm_prior(cfg), ref_cfg)
    size = resolve_bootstrap_size(cfg, data, rng.child(2))
    bp = bag(fit, data, cfg.B, size["M"], rng.child(1), labels=labels)
    mean, cov = bagged_moments(bp)
    vb_mean, vb_cov = plain.moments(labels)
    return {
        "rep": r,
        "M": size,
        "c_ratio": bp.c_ratio,
        "convergence": _convergence(bp, plain),
        "vb_mean": vb_mean,
        "vb_sd": np.sqrt(np.diag(vb_cov)),
        "reference_mean": reference.gaussian("mu").mean,
        "reference_converged": reference.converged,
        "bagged_mean": mean,
        "bagged_sd": np.sqrt(np.diag(cov)),
        "bagged_cov": cov,
    }


def run_gmm_misspec(cfg: ScenarioConfig, workers: int = 1):
    reps = pmap(functools.partial(_gmm_rep, cfg=cfg), range(cfg.reps), workers)
    ok = [r for r in reps if r["convergence"]["plain_converged"]]
    K = int(cfg.hyper["K"])
    z = 0.6744897501960817  # standard normal 75% quantile
    rows, comps = [], []
    for k in range(K):
        est = [r["vb_mean"][k] for r in ok]
        emp = _quartiles(est) if est else [float("nan")] * 3
        vb_iqr = float(np.mean([2 * z * r["vb_sd"][k] for r in ok])) if ok else float("nan")
        bag_iqr = float(np.mean([2 * z * r["bagged_sd"][k] for r in ok])) if ok else float("nan")
        comps.append(
            {
                "component": k,
                "empirical_quartiles": emp,
                "empirical_iqr": emp[2] - emp[0],
                "mean_vb_iqr": vb_iqr,
                "mean_bagged_iqr": bag_iqr,
            }
        )
        for r in ok:
            rows.append(
                {
                    "rep": r["rep"],
                    "component": k,
                    "vb_mean": r["vb_mean"][k],
                    "vb_sd": r["vb_sd"][k],
                    "bagged_mean": r["bagged_mean"][k],
                    "bagged_sd": r["bagged_sd"][k],
                    "M": r["M"]["M"],
                }
            )
    payload = {"replications": reps, "discarded_reps": len(reps) - len(ok), "components": comps}
    return payload, {"gmm": rows}


def _sparse_rep(r: int, cfg: ScenarioConfig) -> dict:
    rng = RngStream(cfg.seed).child(r)
    data = generate_data(cfg, rng.child(0))
    fit, labels, _ = model_for(cfg)
    beta_ols = np.linalg.lstsq(data.X, data.y, rcond=None)[0]
    plain = fit(data, None)
    size = resolve_bootstrap_size(cfg, data, rng.child(2))
    bp = bag(fit, data, cfg.B, size["M"], rng.child(1), labels=labels)
    beta_vb = coefficient_estimate(plain)
    beta_bag = np.mean([coefficient_estimate(c) for c in bp.components], axis=0)
    return {
        "rep": r,
        "M": size,
        "c_ratio": bp.c_ratio,
        "convergence": _convergence(bp, plain),
        "beta_ols": beta_ols,
        "beta_vb": beta_vb,
        "beta_vb_bagging": beta_bag,
        "inclusion_vb": plain.bernoulli("gamma").prob,
        "inclusion_vb_bagging": np.mean([c.bernoulli("gamma").prob for c in bp.components], axis=0),
        "rse": {"vb": compute_rse(beta_vb, beta_ols), "vb_bagging": compute_rse(beta_bag, beta_ols)},
    }


def run_sparse_reg(cfg: ScenarioConfig, workers: int = 1):
    reps = pmap(functools.partial(_sparse_rep, cfg=cfg), range(cfg.reps), workers)
    rows = [{"rep": r["rep"], "method": m, "rse": r["rse"][m], "M": r["M"]["M"]} for r in reps for m in ("vb", "vb_bagging")]
    median = {m: float(np.median([r["rse"][m] for r in reps])) for m in ("vb", "vb_bagging")}
    payload = {
        "beta_true": sparse_beta(cfg),
        "replications": reps,
        "rse_median": median,
        "rse_table": [{"method": m, "rse": median[m]} for m in ("vb", "vb_bagging")],
    }
    return payload, {"rse": rows}


def _mixture_rep(r: int, cfg: ScenarioConfig) -> dict:
    rng = RngStream(cfg.seed).child(r)
    data = generate_data(cfg, rng.child(0))
    fit, labels, _ = model_for(cfg)
    theta_hat = symmetric_mixture_mvle(data)
    size = resolve_bootstrap_size(cfg, data, rng.child(2))
    bp = bag(fit, data, cfg.B, size["M"], rng.child(1), labels=labels)
    mean, cov = bagged_moments(bp)
    c = bp.c_ratio
    x = data.X[:, 0]
    resid = x - sign(x) * theta_hat
    sand = sandwich_covariance(SandwichInputs(resid[:, None], np.eye(1)))
    target = symmetric_mixture_asymptotic_var(data, theta_hat, 1.0)
    scaled = float(c * data.n * cov[0, 0])
    return {
        "rep": r,
        "M": size,
        "c_ratio": c,
        "convergence": _convergence(bp),
        "mvle": theta_hat,
        "bagged_mean": float(mean[0]),
        "bagged_var": float(cov[0, 0]),
        "scaled_bagged_var": scaled,
        "asymptotic_var_c1": target,
        "sandwich_var": float(sand[0, 0]),
        "ratio": scaled / target,
    }


def run_mixture_example(cfg: ScenarioConfig, workers: int = 1):
    reps = pmap(functools.partial(_mixture_rep, cfg=cfg), range(cfg.reps), workers)
    ratios = [r["ratio"] for r in reps]
    payload = {
        "replications": reps,
        "mean_ratio": float(np.mean(ratios)),
        "mean_abs_rel_err": float(np.mean(np.abs(np.asarray(ratios) - 1.0))),
    }
    return payload, {}


def run_coverage(cfg: ScenarioConfig, workers: int = 1):
    h = cfg.hyper
    policy, fixed = parse_m_policy(cfg.M_policy)
    if policy not in ("equals_n", "fixed"):
        raise ConfigError("M_policy: coverage supports equals_n or fixed(M)")
    if cfg.error_family != "gaussian":
        raise ConfigError("error_family: coverage scenario is the well-specified Gaussian")
    scen = GaussianCoverageScenario(
        theta0=np.asarray(h["mean"], dtype=float),
        cov=np.asarray(h["cov"], dtype=float),
        n=cfg.n,
        B=cfg.B,
        M=fixed,
        prior_precision=float(h["prior_precision"]),
        shape=h.get("shape", "bagged"),
        cfg=cfg.fit_config(),
    )
    res = coverage_experiment(scen, cfg.reps, cfg.level, RngStream(cfg.seed), workers)
    payload = {
        "hits": res.hits,
        "reps": res.reps,
        "failed": res.failed,
        "coverage": res.coverage,
        "binomial_ci": list(res.ci),
        "binomial_se": res.se,
        "level": cfg.level,
        "radius_sq": chi2_quantile(cfg.level, len(h["mean"])),
        "ellipsoid_shape": scen.shape,
    }
    return payload, {}


RUNNERS = {
    "toy-gaussian": run_toy_gaussian,
    "toy-gaussian-grid": run_toy_gaussian_grid,
    "gmm-misspec": run_gmm_misspec,
    "sparse-reg": run_sparse_reg,
    "mixture-example": run_mixture_example,
    "coverage": run_coverage,
}


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> tuple[dict, dict]:
    """Run ``cfg`` and return ``(report, tables)`` without touching the filesystem."""
    cfg.validate()
    t0 = time.perf_counter()
    payload, tables = RUNNERS[cfg.scenario](cfg, workers)
    timing = {"wall_seconds": time.perf_counter() - t0, "workers": workers}
    return make_report(cfg.scenario, cfg.to_dict(), payload, timing), tables
