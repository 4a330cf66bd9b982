"""Synthetic task backends: fitness landscapes with tunable opportunity density.

A landscape is a sum of directional "gate" ramps over genotype space. Dense
landscapes put most gate offsets within reach of small mutations, sparse ones
push them far from the baseline so that only large structural jumps can cross
them. The genotype itself serves as the candidate embedding, and the origin
is the untouched baseline.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ConfigurationError,
    Directive,
    FailureKind,
    Genotype,
    MetricDirection,
    TaskCard,
)

DEFAULT_MUTATION_SCALES = {
    Directive.DRAFT: 1.0,
    Directive.REFINE: 0.25,
    Directive.PERTURB_WIDE: 2.0,
    Directive.NEW_MECHANISM: 3.0,
    Directive.DEBUG: 0.05,
}

# Free parameters of the synthetic noise/failure model; the real tasks'
# validation noise is unknown, so these are exposed in configuration.
DEFAULT_NOISE_VAL_SIGMA = 0.001
DEFAULT_NOISE_TEST_SIGMA = 0.001
DEFAULT_P_FAIL = 0.05
DEFAULT_P_TIMEOUT = 0.02

NEAR_OFFSET_RANGE = (0.0, 0.5)
DEEP_OFFSET_RANGE = (3.0, 4.0)
FAR_OFFSET_RANGE = (2.5, 4.0)
NEAR_WIDTH_RANGE = (1.0, 2.0)
DEEP_WIDTH_RANGE = (1.0, 2.0)
FAR_WIDTH_RANGE = (1.0, 2.0)
CONE_KAPPA = 0.3
TOTAL_GAIN_FRACTION = 0.5  # sum of gate gains relative to the metric range


class EvalSplit(enum.Enum):
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class Gate:
    """One improvement opportunity: a ramp along a unit direction."""

    direction_u: Genotype
    offset_b: float
    gain_a: float
    width_w: float

    def __post_init__(self):
        object.__setattr__(self, "direction_u", tuple(float(v) for v in self.direction_u))
        norm = math.sqrt(sum(v * v for v in self.direction_u))
        if abs(norm - 1.0) > 1e-9:
            raise ConfigurationError(f"gate direction must be a unit vector, |u|={norm}")
        if self.offset_b < 0:
            raise ConfigurationError("gate offset must be >= 0")
        if self.gain_a <= 0 or self.width_w <= 0:
            raise ConfigurationError("gate gain and width must be > 0")


@dataclass(frozen=True)
class EvalResult:
    value: float | None
    failure: FailureKind
    tokens_consumed: int
    elapsed: float

    def __post_init__(self):
        if (self.value is None) != (self.failure is not FailureKind.NONE):
            raise ValueError("value must be present iff failure is none")


@dataclass(frozen=True)
class LandscapeSpec:
    seed: int
    dims: int
    gates: tuple[Gate, ...]
    f0: float
    direction: MetricDirection
    density_param: float
    noise_val_sigma: float = DEFAULT_NOISE_VAL_SIGMA
    noise_test_sigma: float = DEFAULT_NOISE_TEST_SIGMA
    test_bias: float = 0.0
    p_fail: float = DEFAULT_P_FAIL
    p_timeout: float = DEFAULT_P_TIMEOUT
    # stored as sorted (kind, sigma) pairs so the spec stays hashable
    mutation_scales: tuple[tuple[str, float], ...] = tuple(
        sorted((d.value, s) for d, s in DEFAULT_MUTATION_SCALES.items()))

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.dims < 2:
            raise ConfigurationError("landscape needs dims >= 2")
        if not 0.0 <= self.density_param <= 1.0:
            raise ConfigurationError("density_param must lie in [0, 1]")
        if self.noise_val_sigma < 0 or self.noise_test_sigma < 0:
            raise ConfigurationError("noise sigmas must be >= 0")
        for p in (self.p_fail, self.p_timeout):
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError("failure rates must be probabilities")
        if isinstance(self.mutation_scales, dict):
            object.__setattr__(self, "mutation_scales", tuple(
                sorted((k.value if isinstance(k, Directive) else str(k), float(v))
                       for k, v in self.mutation_scales.items())))

    def scale_for(self, directive: Directive) -> float:
        for kind, sigma in self.mutation_scales:
            if kind == directive.value:
                return sigma
        raise ConfigurationError(f"no mutation scale for directive {directive.value!r}")

    def baseline_genotype(self) -> Genotype:
        return (0.0,) * self.dims


@functools.lru_cache(maxsize=128)
def _gate_arrays(spec: LandscapeSpec):
    U = np.array([g.direction_u for g in spec.gates], dtype=float)
    b = np.array([g.offset_b for g in spec.gates], dtype=float)
    a = np.array([g.gain_a for g in spec.gates], dtype=float)
    w = np.array([g.width_w for g in spec.gates], dtype=float)
    return U, b, a, w


def generate_landscape(seed: int, density_param: float, dims: int,
                       direction: MetricDirection = MetricDirection.MAXIMIZE,
                       **overrides) -> LandscapeSpec:
    """Deterministically generate a landscape for one opportunity density.

    Gate count is round(4 + 28 * density). Offsets are drawn from the near
    range U[0, 0.5] with probability density_param and from the far range
    U[2.5, 4.0] otherwise, so density 1 puts every opportunity within small-
    mutation reach and density 0 puts every one beyond it. Gains are
    normalized so their sum equals half the metric range.

    Near gates share a direction cone (one coherent mechanism exploited in
    small increments); far gates point in independent directions (distinct
    mechanisms). Away from the density endpoints a slice of the near budget
    becomes deep gates: cone-aligned opportunities offset past small-step
    reach, which only late wide perturbations from an advanced incumbent can
    unlock.
    """
    if dims < 2:
        raise ConfigurationError("dims must be >= 2")
    if not 0.0 <= density_param <= 1.0:
        raise ConfigurationError("density_param must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    m = int(math.floor(4 + 28 * density_param + 0.5))
    axis = rng.standard_normal(dims)
    axis /= np.linalg.norm(axis)
    mix = rng.random(m)
    b_near = rng.uniform(*NEAR_OFFSET_RANGE, m)
    b_deep = rng.uniform(*DEEP_OFFSET_RANGE, m)
    b_far = rng.uniform(*FAR_OFFSET_RANGE, m)
    w_near = rng.uniform(*NEAR_WIDTH_RANGE, m)
    w_deep = rng.uniform(*DEEP_WIDTH_RANGE, m)
    w_far = rng.uniform(*FAR_WIDTH_RANGE, m)
    cone_noise = rng.standard_normal((m, dims))
    iso_dirs = rng.standard_normal((m, dims))
    raw_gains = rng.uniform(0.5, 1.5, m)
    gains = TOTAL_GAIN_FRACTION * raw_gains / raw_gains.sum()
    p_deep = min(3.0 * density_param * (1.0 - density_param), 0.45)
    gates = []
    for j in range(m):
        if mix[j] < density_param * (1.0 - p_deep):
            u, b, w = axis + CONE_KAPPA * cone_noise[j], b_near[j], w_near[j]
        elif mix[j] < density_param:
            u, b, w = axis + CONE_KAPPA * cone_noise[j], b_deep[j], w_deep[j]
        else:
            u, b, w = iso_dirs[j], b_far[j], w_far[j]
        u = u / np.linalg.norm(u)
        gates.append(Gate(direction_u=tuple(u), offset_b=float(b),
                          gain_a=float(gains[j]), width_w=float(w)))
    f0 = overrides.pop("f0", 0.3 if direction is MetricDirection.MAXIMIZE else 0.7)
    return LandscapeSpec(seed=seed, dims=dims, gates=tuple(gates), f0=f0,
                         direction=direction, density_param=density_param,
                         **overrides)


def latent_fitness(spec: LandscapeSpec, x) -> float:
    """Noiseless fitness: f0 plus (or minus, for minimize) the sum of gate ramps."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dims,):
        raise ValueError(f"genotype has dim {x.shape}, landscape expects {spec.dims}")
    U, b, a, w = _gate_arrays(spec)
    z = (U @ x - b) / w
    gain = float(a @ np.clip(z, 0.0, 1.0))
    if spec.direction is MetricDirection.MAXIMIZE:
        return spec.f0 + gain
    return spec.f0 - gain


def _cost_model(x: np.ndarray) -> tuple[int, float]:
    # Deterministic per-call cost: larger edits cost more tokens and time.
    dist = float(np.linalg.norm(x))
    tokens = 600 + int(math.floor(40.0 * dist + 0.5))
    elapsed = 45.0 + 3.0 * dist
    return tokens, elapsed


def evaluate(spec: LandscapeSpec, x, split: EvalSplit, rng) -> EvalResult:
    """One evaluation of a genotype on the given split.

    Validation draws observation noise and injects failures at the configured
    rates (timeouts first, then execution_error/invalid_metric 50/50). The
    test split adds test_bias plus its own noise and never fails.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dims,):
        raise ValueError(f"genotype has dim {x.shape}, landscape expects {spec.dims}")
    tokens, elapsed = _cost_model(x)
    latent = latent_fitness(spec, x)
    if split is EvalSplit.TEST:
        value = latent + spec.test_bias + spec.noise_test_sigma * rng.standard_normal()
        return EvalResult(value=float(value), failure=FailureKind.NONE,
                          tokens_consumed=tokens, elapsed=elapsed)
    u = rng.random()
    if u < spec.p_timeout:
        return EvalResult(value=None, failure=FailureKind.TIMEOUT,
                          tokens_consumed=tokens, elapsed=300.0)
    if u < spec.p_timeout + spec.p_fail:
        kind = FailureKind.EXECUTION_ERROR if rng.random() < 0.5 else FailureKind.INVALID_METRIC
        return EvalResult(value=None, failure=kind,
                          tokens_consumed=tokens, elapsed=elapsed)
    value = latent + spec.noise_val_sigma * rng.standard_normal()
    return EvalResult(value=float(value), failure=FailureKind.NONE,
                      tokens_consumed=tokens, elapsed=elapsed)


def random_unit_vector(dims: int, rng) -> np.ndarray:
    while True:
        v = rng.standard_normal(dims)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def propose_child(spec: LandscapeSpec, parent, directive: Directive, rng) -> Genotype:
    """Mutate a parent genotype: child = anchor + sigma(directive) * unit vector.

    new_mechanism always re-seeds from the baseline genotype, whatever parent
    was passed; every other directive perturbs the parent itself.
    """
    if not isinstance(directive, Directive):
        raise ConfigurationError(f"unknown directive {directive!r}")
    parent = np.asarray(parent, dtype=float)
    if parent.shape != (spec.dims,):
        raise ValueError(f"parent has dim {parent.shape}, landscape expects {spec.dims}")
    sigma = spec.scale_for(directive)
    anchor = np.zeros(spec.dims) if directive is Directive.NEW_MECHANISM else parent
    child = anchor + sigma * random_unit_vector(spec.dims, rng)
    return tuple(float(v) for v in child)


def landscape_card(spec: LandscapeSpec, task_id: str) -> TaskCard:
    """Task card for a synthetic landscape: unit metric range, baseline f0."""
    if spec.direction is MetricDirection.MAXIMIZE:
        return TaskCard(task_id=task_id, direction=spec.direction,
                        p_best=1.0, p_worst=0.0, p_baseline=spec.f0)
    return TaskCard(task_id=task_id, direction=spec.direction,
                    p_best=0.0, p_worst=1.0, p_baseline=spec.f0)


# ---------------------------------------------------------------------------
# Task backend interface

class TaskBackend:
    """What the run driver needs from a task: propose children and evaluate them."""

    card: TaskCard
    dims: int

    def baseline_genotype(self) -> Genotype:
        raise NotImplementedError

    def propose(self, parent, directive: Directive, rng) -> Genotype:
        raise NotImplementedError

    def evaluate(self, genotype, split: EvalSplit, rng) -> EvalResult:
        raise NotImplementedError

    def reach_scale(self) -> float:
        """Per-task reach normalization constant C_task."""
        raise NotImplementedError


def calibrate_reach(backend: TaskBackend, seed: int, steps: int = 100) -> float:
    """Max distance from baseline over a 100-step random walk.

    The walk takes wide-perturbation steps, the largest mutation that does
    not re-seed from the baseline, so the constant reflects how far sustained
    exploration can actually travel on this task.
    """
    rng = np.random.default_rng(seed)
    base = np.asarray(backend.baseline_genotype(), dtype=float)
    x = base.copy()
    reach = 0.0
    for _ in range(steps):
        x = np.asarray(backend.propose(tuple(x), Directive.PERTURB_WIDE, rng), dtype=float)
        reach = max(reach, float(np.linalg.norm(x - base)))
    return reach if reach > 1e-12 else 1.0


def _calibration_seed(*parts) -> int:
    import hashlib
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


class SyntheticBackend(TaskBackend):
    def __init__(self, spec: LandscapeSpec, task_id: str,
                 reach_scale: float | None = None):
        self.spec = spec
        self.task_id = task_id
        self.card = landscape_card(spec, task_id)
        self.dims = spec.dims
        self._reach_scale = reach_scale

    def baseline_genotype(self) -> Genotype:
        return self.spec.baseline_genotype()

    def propose(self, parent, directive: Directive, rng) -> Genotype:
        return propose_child(self.spec, parent, directive, rng)

    def evaluate(self, genotype, split: EvalSplit, rng) -> EvalResult:
        return evaluate(self.spec, genotype, split, rng)

    def reach_scale(self) -> float:
        if self._reach_scale is None:
            seed = _calibration_seed("reach", self.task_id, self.spec.seed)
            self._reach_scale = calibrate_reach(self, seed)
        return self._reach_scale


# ---------------------------------------------------------------------------
# Landscape spec files (written by `searchlab gen`, referenced from run configs)

def spec_to_dict(spec: LandscapeSpec) -> dict:
    return {
        "schema": "landscape-v1",
        "seed": spec.seed,
        "dims": spec.dims,
        "density_param": spec.density_param,
        "direction": spec.direction.value,
        "f0": spec.f0,
        "noise_val_sigma": spec.noise_val_sigma,
        "noise_test_sigma": spec.noise_test_sigma,
        "test_bias": spec.test_bias,
        "p_fail": spec.p_fail,
        "p_timeout": spec.p_timeout,
        "mutation_scales": {k: v for k, v in spec.mutation_scales},
        "gates": [
            {"u": list(g.direction_u), "b": g.offset_b, "a": g.gain_a, "w": g.width_w}
            for g in spec.gates
        ],
    }


def spec_from_dict(data: dict) -> LandscapeSpec:
    if data.get("schema") != "landscape-v1":
        raise ConfigurationError(f"unsupported landscape schema {data.get('schema')!r}")
    gates = tuple(
        Gate(direction_u=tuple(g["u"]), offset_b=g["b"], gain_a=g["a"], width_w=g["w"])
        for g in data["gates"])
    return LandscapeSpec(
        seed=data["seed"], dims=data["dims"], gates=gates, f0=data["f0"],
        direction=MetricDirection.from_string(data["direction"]),
        density_param=data["density_param"],
        noise_val_sigma=data["noise_val_sigma"],
        noise_test_sigma=data["noise_test_sigma"],
        test_bias=data["test_bias"], p_fail=data["p_fail"],
        p_timeout=data["p_timeout"],
        mutation_scales=tuple(sorted((k, float(v))
                                     for k, v in data["mutation_scales"].items())),
    )


def write_spec_file(path, spec: LandscapeSpec):
    text = json.dumps(spec_to_dict(spec), indent=2, allow_nan=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_spec_file(path) -> LandscapeSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))
