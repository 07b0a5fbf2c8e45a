"""Seeded Monte-Carlo orchestration across the three link scenarios.

Draw discipline
---------------
Every random quantity comes from a named stream seeded by the tuple
(master_seed, axis_index, trial_index, stream_id).  A given trial at a
given axis point therefore reproduces the identical waveform, Doppler
set, CSI, and noise in every link mode, so mode comparisons are paired;
and any trial can be regenerated in isolation, which keeps sweeps
bit-reproducible under any degree of parallelism.

Doppler convention
------------------
Doppler values are drawn in cycles per pulse on doppler_range (default
[-0.5, 0.5), the full unambiguous band) and converted to radians per
pulse for the steering vectors.  The reflected paths are redrawn until
all pairwise circular separations reach doppler_min_gap cycles (default
1/(4N), half the Rayleigh resolution).  Unresolvable paths make the
Gram matrix arbitrarily ill-conditioned, so without the separation
floor the per-axis means are dominated by rare near-singular draws and
do not stabilize at realistic trial counts.

Recorded metrics
----------------
nmse       against the trial's true reflectivities, on the normalized
           scene (direct power gamma, reflected power 1).
mse        Tr((A^H R^-1 A)^-1) on the channel as drawn, before scene
           normalization.  This is the quantity the phase design
           minimizes; on it the optimal policy beats any other policy
           realization-by-realization.  The normalization factor is a
           function of the policy's own channel, so post-normalization
           traces mix the design objective with the scene scaling and
           do not order deterministically.
crb_trace  Tr(C_CRB) on the normalized scene (what the NMSE curves are
           bounded by).
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bounds import crb
from .channel import (
    NLOS_FORMS,
    crandn,
    draw_csi,
    nlos_coefficient,
    normalize_scenario,
)
from .errors import GenerationError, NumericalError
from .estimator import NoiseModel, blue_estimate, estimator_mse, nmse
from .model import build_sensing_matrix, make_random_waveform
from .phaseopt import PhasePolicy, apply_policy

LINK_MODES = ("los_only", "nlos_random", "nlos_optimal", "nlos_fixed")

# stable stream ids; appending is fine, reordering breaks reproducibility
_STREAMS = {"waveform": 0, "doppler": 1, "channel": 2, "noise": 3, "phase": 4}

RESAMPLE_BUDGET = 100

MODE_LABELS = {
    "los_only": "los",
    "nlos_random": "nlos_random",
    "nlos_optimal": "nlos_optimal",
    "nlos_fixed": "nlos_fixed",
}


@dataclass(frozen=True)
class Scenario:
    """Everything needed to regenerate one experiment deterministically."""

    n: int = 50
    k: int = 5
    m: int = 10
    gamma: float = 1e-2
    sigma2: float = 1e-2
    trials: int = 1000
    master_seed: int = 0
    link_mode: str = "nlos_optimal"
    nlos_form: str = "complex"
    doppler_range: tuple = (-0.5, 0.5)  # cycles per pulse
    doppler_min_gap: float = None  # cycles; None means 1/(4n)
    freeze_waveform: bool = False
    phase_policy: PhasePolicy = None  # required for link_mode="nlos_fixed"
    fixed_panels: tuple = None  # CSI replay; overrides the panel draw
    noise_cov: np.ndarray = None  # full N x N covariance; overrides sigma2

    def __post_init__(self):
        if min(self.n, self.k, self.m, self.trials) < 1:
            raise ValueError("n, k, m, trials must be positive")
        if self.k > self.n:
            raise ValueError("k must not exceed n")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if self.link_mode not in LINK_MODES:
            raise ValueError(f"unknown link mode: {self.link_mode!r}")
        if self.nlos_form not in NLOS_FORMS:
            raise ValueError(f"unknown nlos form: {self.nlos_form!r}")
        lo, hi = self.doppler_range
        if not lo < hi:
            raise ValueError("doppler_range must be a nonempty interval")
        gap = self.min_gap_cycles
        if gap < 0 or self.k * gap >= (hi - lo):
            raise ValueError("doppler_min_gap leaves no room for k paths")
        if self.link_mode == "nlos_fixed" and (
            self.phase_policy is None or self.phase_policy.kind != "fixed"
        ):
            raise ValueError("nlos_fixed requires a fixed phase policy")
        if self.fixed_panels is not None:
            panels = tuple(self.fixed_panels)
            if len(panels) != self.k or any(p.m != self.m for p in panels):
                raise ValueError("fixed panels must match k and m")
            object.__setattr__(self, "fixed_panels", panels)
        if self.noise_cov is not None:
            R = np.asarray(self.noise_cov, dtype=complex)
            if R.shape != (self.n, self.n):
                raise ValueError("noise_cov must be n x n")
            object.__setattr__(self, "noise_cov", R)

    def noise_model(self) -> NoiseModel:
        if self.noise_cov is None:
            return NoiseModel.scaled_identity(self.sigma2, self.n)
        return NoiseModel(covariance=self.noise_cov)

    @property
    def min_gap_cycles(self) -> float:
        if self.doppler_min_gap is None:
            return 1.0 / (4.0 * self.n)
        return float(self.doppler_min_gap)

    def policy(self) -> PhasePolicy:
        if self.phase_policy is not None:
            return self.phase_policy
        if self.link_mode == "nlos_random":
            return PhasePolicy(kind="random")
        return PhasePolicy(kind="optimal")


@dataclass(frozen=True)
class TrialRecord:
    nmse: float
    mse: float
    crb_trace: float


def _stream(scenario: Scenario, axis_index: int, trial_index: int, name: str):
    key = (scenario.master_seed, axis_index, trial_index, _STREAMS[name])
    return np.random.default_rng(np.random.SeedSequence(key))


def _draw_dopplers(scenario: Scenario, rng) -> np.ndarray:
    """LoS Doppler followed by k separated reflected-path Dopplers, cycles."""
    lo, hi = scenario.doppler_range
    span = hi - lo
    gap = scenario.min_gap_cycles
    u_los = rng.uniform(lo, hi)
    for _ in range(RESAMPLE_BUDGET):
        u = rng.uniform(lo, hi, scenario.k)
        if scenario.k == 1 or gap == 0:
            return np.concatenate(([u_los], u))
        srt = np.sort(u)
        seps = np.diff(srt)
        wrap = srt[0] + span - srt[-1]  # the interval is a circle for phases
        if min(seps.min(initial=np.inf), wrap) >= gap:
            return np.concatenate(([u_los], u))
    raise GenerationError("no sufficiently separated Doppler set within budget")


def _draw_scene(scenario: Scenario, axis_index: int, trial_index: int):
    """Draw the shared raw scene; resample exact-zero degeneracies.

    The redraw predicate is evaluated for every policy a sweep can ask
    for (optimal, random, and the scenario's own), so all link modes
    accept or reject identical draws and pairing is preserved.
    """
    rng_c = _stream(scenario, axis_index, trial_index, "channel")
    rng_p = _stream(scenario, axis_index, trial_index, "phase")
    policies = [PhasePolicy(kind="optimal")]
    if scenario.phase_policy is not None and scenario.phase_policy.kind == "fixed":
        policies.append(scenario.phase_policy)
    for _ in range(RESAMPLE_BUDGET):
        if scenario.fixed_panels is not None:
            h_los = complex(crandn(rng_c))
            panels = scenario.fixed_panels
            alpha = crandn(rng_c, scenario.k)
            alpha_los = complex(crandn(rng_c))
        else:
            h_los, panels, alpha, alpha_los = draw_csi(scenario.m, scenario.k, rng_c)
        random_panels = apply_policy(panels, PhasePolicy(kind="random"), rng=rng_p)
        if alpha_los * h_los == 0:
            continue
        ok = True
        for applied in [random_panels] + [apply_policy(panels, p) for p in policies]:
            csi = np.array(
                [nlos_coefficient(p, scenario.nlos_form) for p in applied], dtype=complex
            )
            if alpha @ csi == 0:
                ok = False
                break
        if ok:
            return h_los, panels, random_panels, alpha, alpha_los
    raise GenerationError("scene still degenerate after resample budget")


def _draw_trial_inputs(scenario: Scenario, trial_index: int, axis_index: int):
    """Everything random in one trial; identical for every link mode."""
    if trial_index < 0 or axis_index < 0:
        raise ValueError("indices must be nonnegative")
    wf_trial = 0 if scenario.freeze_waveform else trial_index
    x = make_random_waveform(scenario.n, _stream(scenario, axis_index, wf_trial, "waveform"))
    u = _draw_dopplers(scenario, _stream(scenario, axis_index, trial_index, "doppler"))
    nus = 2.0 * np.pi * u  # cycles -> radians per pulse
    scene_parts = _draw_scene(scenario, axis_index, trial_index)
    noise_rng = _stream(scenario, axis_index, trial_index, "noise")
    if scenario.noise_cov is None:
        w = np.sqrt(scenario.sigma2) * crandn(noise_rng, scenario.n)
    else:
        w = np.linalg.cholesky(scenario.noise_cov) @ crandn(noise_rng, scenario.n)
    return x, nus, scene_parts, w


def _estimate_mode(scenario: Scenario, x, nus, scene_parts, w) -> TrialRecord:
    h_los, panels, random_panels, alpha, alpha_los = scene_parts
    noise = scenario.noise_model()

    if scenario.link_mode == "los_only":
        scene = normalize_scenario(
            h_los, panels, alpha, alpha_los, scenario.gamma, scenario.nlos_form
        )
        A = build_sensing_matrix(x, [nus[0]], [scene.h_los])
        y = A.columns @ np.array([scene.alpha_los]) + w
        rep = blue_estimate(A, noise, y, alpha_true=[scene.alpha_los])
        raw_mse = estimator_mse(build_sensing_matrix(x, [nus[0]], [h_los]), noise)
        bound = crb(A, noise).trace
        return TrialRecord(nmse=rep.nmse, mse=raw_mse, crb_trace=bound)

    applied = (
        random_panels
        if scenario.link_mode == "nlos_random"
        else apply_policy(panels, scenario.policy())
    )
    scene = normalize_scenario(
        h_los, applied, alpha, alpha_los, scenario.gamma, scenario.nlos_form
    )
    raw_csi = np.array(
        [nlos_coefficient(p, scenario.nlos_form) for p in applied], dtype=complex
    )
    A = build_sensing_matrix(x, nus[1:], scene.nlos_csi)
    y = A.columns @ scene.alpha + w
    rep = blue_estimate(A, noise, y, alpha_true=scene.alpha)
    raw_mse = estimator_mse(build_sensing_matrix(x, nus[1:], raw_csi), noise)
    bound = crb(A, noise).trace
    return TrialRecord(nmse=rep.nmse, mse=raw_mse, crb_trace=bound)


def run_trial(scenario: Scenario, trial_index: int, axis_index: int = 0) -> TrialRecord:
    """Generate one trial and estimate it under the scenario's link mode."""
    x, nus, scene_parts, w = _draw_trial_inputs(scenario, trial_index, axis_index)
    return _estimate_mode(scenario, x, nus, scene_parts, w)


SWEEP_MODES = ("los_only", "nlos_random", "nlos_optimal")


@dataclass(frozen=True)
class SweepResult:
    """Aggregates for one axis sweep, one entry per (axis point, mode)."""

    axis_name: str
    axis_values: np.ndarray
    modes: tuple  # CSV-facing mode labels, e.g. "los"
    mean_nmse: dict  # label -> array over axis
    stderr_nmse: dict
    mean_crb_trace: dict
    trials_used: int  # requested per point
    included: np.ndarray  # per point, after exclusions
    excluded: np.ndarray  # per point
    records: dict  # label -> field -> (points, trials) array, nan where excluded


def _point_trials(args):
    template, axis_index, axis_value, axis_name, trial_lo, trial_hi = args
    scenarios = [
        replace(template, link_mode=mode, **{axis_name: axis_value})
        for mode in SWEEP_MODES
    ]
    out = []
    for t in range(trial_lo, trial_hi):
        try:
            # the trial's draws are mode-independent, so make them once
            x, nus, scene_parts, w = _draw_trial_inputs(scenarios[0], t, axis_index)
            recs = [_estimate_mode(s, x, nus, scene_parts, w) for s in scenarios]
        except NumericalError:
            out.append((t, None))
            continue
        out.append((t, recs))
    return out


def _sweep(template: Scenario, axis_name: str, axis_values, workers: int = 1) -> SweepResult:
    values = np.asarray(list(axis_values), dtype=float)
    if values.size == 0:
        raise ValueError("axis must contain at least one value")
    if np.any(values <= 0):
        raise ValueError(f"{axis_name} axis values must be positive")
    labels = tuple(MODE_LABELS[m] for m in SWEEP_MODES)
    P, T = values.size, template.trials
    fields = ("nmse", "mse", "crb_trace")
    records = {lab: {f: np.full((P, T), np.nan) for f in fields} for lab in labels}
    excluded = np.zeros(P, dtype=int)

    tasks = [
        (template, i, float(v), axis_name, lo, min(lo + 250, T))
        for i, v in enumerate(values)
        for lo in range(0, T, 250)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_point_trials, tasks))
    else:
        chunks = [_point_trials(t) for t in tasks]

    for task, chunk in zip(tasks, chunks):
        i = task[1]
        for t, recs in chunk:
            if recs is None:
                continue
            for lab, rec in zip(labels, recs):
                records[lab]["nmse"][i, t] = rec.nmse
                records[lab]["mse"][i, t] = rec.mse
                records[lab]["crb_trace"][i, t] = rec.crb_trace

    mean_nmse, stderr_nmse, mean_crb = {}, {}, {}
    for lab in labels:
        nm = records[lab]["nmse"]
        ok = ~np.isnan(nm)
        counts = ok.sum(axis=1)
        if np.any(counts < 2):
            raise GenerationError("an axis point lost almost all trials to exclusions")
        mean_nmse[lab] = np.nanmean(nm, axis=1)
        stderr_nmse[lab] = np.nanstd(nm, axis=1, ddof=1) / np.sqrt(counts)
        mean_crb[lab] = np.nanmean(records[lab]["crb_trace"], axis=1)
    excluded = T - (~np.isnan(records[labels[0]]["nmse"])).sum(axis=1)

    return SweepResult(
        axis_name=axis_name,
        axis_values=values,
        modes=labels,
        mean_nmse=mean_nmse,
        stderr_nmse=stderr_nmse,
        mean_crb_trace=mean_crb,
        trials_used=T,
        included=T - excluded,
        excluded=excluded,
        records=records,
    )


def sweep_gamma(template: Scenario, gamma_values, workers: int = 1) -> SweepResult:
    """NMSE and bound versus the direct-to-reflected power ratio."""
    return _sweep(template, "gamma", gamma_values, workers)


def sweep_noise(template: Scenario, sigma2_values, workers: int = 1) -> SweepResult:
    """NMSE and bound versus the noise power at the template's gamma."""
    return _sweep(template, "sigma2", sigma2_values, workers)


def sweep_crb(template: Scenario, gamma_values, workers: int = 1) -> SweepResult:
    """Bound-focused sweep; same engine, consumers read mean_crb_trace."""
    return _sweep(template, "gamma", gamma_values, workers)
