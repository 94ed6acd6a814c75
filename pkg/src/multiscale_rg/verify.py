"""Batch property checks with counterexample reporting."""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable

from .dyadic import DyadicTime
from .lattice import cantor_grid, residual_check
from .model import MODEL_A, MODEL_B, ModelSpec, ProblemSpec, State, add_states, boundary_shift
from .noise import Bernoulli
from .rg import fixed_point_A, random_table_map, rg_apply, rg_iterate
from .solver import (BLOWUP, ConstAt, Cutoff, eval_fractional, first_disagreement, state_start,
                     flow_phi, flow_psi, nonuniqueness_witness, solve_regularized,
                     solve_strong)
from .stochastic import sampler_psi, stochastic_rg_apply, two_sample_kernel_test


@dataclass
class PropertyResult:
    name: str
    passed: bool
    checked: int
    counterexample: dict | None = None
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checked": self.checked,
                "counterexample": self.counterexample, "details": self.details,
                "seconds": round(self.seconds, 3)}


def _state(a: State) -> list[int]:
    return list(a.values) + ([f"tail={a.tail}"] if a.tail else [])


def _random_bits(rng: random.Random, n: int) -> State:
    return State(tuple(rng.getrandbits(1) for _ in range(n)))


def check_rg_commutation(model: ModelSpec, reg, n_max: int, xi_model: ModelSpec | None = None) -> PropertyResult:
    """RG image of the level-N flow map equals the level-(N+1) flow map, exhaustively."""
    xi_model = model if xi_model is None else xi_model
    checked = 0
    for N in range(1, n_max + 1):
        lhs = rg_apply(flow_psi(model, N, reg), xi_model)
        rhs = flow_psi(model, N + 1, reg)
        for a in cantor_grid(N + 1):
            checked += 1
            x, y = lhs(a), rhs(a)
            if x != y:
                return PropertyResult(f"rg_commutation[{model.name},{type(reg).__name__}]", False, checked,
                                      {"N": N, "input": _state(a), "rg": _state(x), "simulated": _state(y)})
    return PropertyResult(f"rg_commutation[{model.name},{type(reg).__name__}]", True, checked)


def check_flow_identity(model: ModelSpec, n_max: int) -> PropertyResult:
    """Unit-time map from direct simulation equals ``psi o psi + beta_b``."""
    checked = 0
    for N in range(1, n_max + 1):
        psi = flow_psi(model, N)
        for b in (0, 1):
            phi = flow_phi(model, N, Cutoff(), b)
            for a in cantor_grid(N + 1):
                checked += 1
                x = phi(a)
                y = add_states(model.space, psi(psi(a)), boundary_shift(model, b, a))
                if x != y:
                    return PropertyResult(f"flow_identity[{model.name}]", False, checked,
                                          {"N": N, "b": b, "input": _state(a), "phi": _state(x), "composed": _state(y)})
    return PropertyResult(f"flow_identity[{model.name}]", True, checked)


def check_fractional(model: ModelSpec, n_max: int, problems: int, rng: random.Random) -> PropertyResult:
    """Composition of flow maps equals direct simulation at every lattice time up to 3."""
    checked = 0
    for _ in range(problems):
        a = _random_bits(rng, n_max + 1)
        b = tuple(rng.getrandbits(1) for _ in range(3))
        problem = ProblemSpec(model, a, b)
        for N in range(1, n_max + 1):
            sol = solve_regularized(problem, N, Cutoff(), DyadicTime(3))
            for m in range((3 << N) + 1):
                t = DyadicTime(m, N)
                checked += 1
                x = eval_fractional(problem, N, Cutoff(), t)
                y = sol.state_at(t)
                # compare the dynamical scales n_c..N
                depth = N + 1 - state_start(t)
                if x.prefix(depth) != y.prefix(depth):
                    return PropertyResult(f"fractional[{model.name}]", False, checked,
                                          {"N": N, "t": [t.numerator, t.level], "a": _state(a), "b": list(b),
                                           "composed": _state(x), "simulated": _state(y)})
    return PropertyResult(f"fractional[{model.name}]", True, checked)


def brute_force_blowup(problem: ProblemSpec, depth: int = 8):
    """Staircase read off a plain cutoff simulation.

    Returns ``(T, staircase)`` where ``T`` is ``t_first(n) + 2 tau(n)`` for the
    scales ``n`` in the checked band (``None`` when no scale ever turns on or
    the band disagrees) and ``staircase`` maps each scale to its first switch-on
    time and the value one step later.
    """
    n0 = problem.n_max0
    base = max(n0, 1)
    top = base + depth
    horizon = DyadicTime(problem.t_bc + 3) if n0 == 0 and problem.t_bc is not None else DyadicTime(2, base)
    if n0 == 0 and problem.t_bc is None:
        horizon = DyadicTime(3)
    sol = solve_regularized(problem, top + 1, Cutoff(), horizon)
    stair = {}
    candidates = set()
    for n in range(base, top + 1):
        row = sol.rows[n]
        first = next((m for m, v in enumerate(row) if v), None)
        if first is None or first + 1 >= len(row):
            stair[n] = None
            continue
        stair[n] = (DyadicTime(first, n), row[first + 1])
        candidates.add(DyadicTime(first, n) + DyadicTime(2, n))
    T = candidates.pop() if len(candidates) == 1 and None not in stair.values() else None
    return T, stair


def check_staircase(count: int, rng: random.Random, max_n0: int = 6, depth: int = 8) -> PropertyResult:
    """Closed-form blowup time and staircase agree with brute-force simulation."""
    checked = 0
    for _ in range(count):
        n0 = rng.randint(0, max_n0)
        vals = tuple(rng.getrandbits(1) for _ in range(max(n0 - 1, 0))) + ((1,) if n0 else ())
        t_bc = rng.randint(0, 2)
        b = (0,) * t_bc + (1,)
        problem = ProblemSpec(MODEL_B, State(vals), b)
        rep = solve_strong(problem, DyadicTime(8))
        T_bf, stair = brute_force_blowup(problem, depth)
        checked += 1
        ok = rep.outcome == BLOWUP and rep.T == T_bf
        if ok:
            for n, entry in stair.items():
                if entry is None or entry[0] != rep.T - DyadicTime(2, n) or entry[1] != MODEL_B.f(1, 0):
                    ok = False
                    break
        if not ok:
            return PropertyResult("blowup_staircase", False, checked,
                                  {"a": list(vals), "b": list(b), "T": str(rep.T), "brute_force_T": str(T_bf)})
    return PropertyResult("blowup_staircase", True, checked)


def check_fixed_point(maps: int, k_range: range, rng: random.Random) -> PropertyResult:
    """After k RG steps the first k-2 components equal the model-A fixed point."""
    checked = 0
    starts = [("psi1", flow_psi(MODEL_A, 1))]
    starts += [(f"random{i}", random_table_map(rng, rng.randint(1, 3), rng.randint(1, 3))) for i in range(maps)]
    for label, psi1 in starts:
        for k in k_range:
            psi = rg_iterate(psi1, MODEL_A, k)
            for a in cantor_grid(k):
                checked += 1
                if psi(a).prefix(k - 2) != fixed_point_A(a).prefix(k - 2):
                    return PropertyResult("fixed_point_attraction", False, checked,
                                          {"start": label, "k": k, "input": _state(a),
                                           "iterate": _state(psi(a)), "fixed_point": _state(fixed_point_A(a))})
    return PropertyResult("fixed_point_attraction", True, checked)


def _field_rows(sol) -> list[list[int]]:
    return [[p.scale, p.time.numerator, p.time.level, v] for p, v in sol.points()]


def check_nonuniqueness(N_values: range) -> PropertyResult:
    """Witness pair for model B: residual-free, equal up to T, split at (n, T + 2 tau_n)."""
    problem = ProblemSpec(MODEL_B, State.of(0, 1), (1, 0))
    T = solve_strong(problem, DyadicTime(2)).T
    n0 = problem.n_max0
    checked = 0
    details = {}
    for N in N_values:
        s1, s2 = nonuniqueness_witness(problem, N)
        checked += 1
        bad = residual_check(MODEL_B, s1.to_field(N), problem, N) + residual_check(MODEL_B, s2.to_field(N), problem, N)
        early = first_disagreement(s1, s2, N)
        pattern = all(s1[n, T + DyadicTime(2, n)] == 0 and s2[n, T + DyadicTime(2, n)] == 1
                      for n in range(n0 + 2, N))
        details[N] = {"first_disagreement": None if early is None else [early.scale, early.time.numerator, early.time.level],
                      "witnesses": [_field_rows(s1), _field_rows(s2)],
                      "regularizations": [s1.reg.describe(), s2.reg.describe()]}
        if bad or early is None or early.time <= T or not pattern:
            return PropertyResult("nonuniqueness", False, checked,
                                  {"N": N, "violations": len(bad), "first_disagreement": details[N]["first_disagreement"]})
    return PropertyResult("nonuniqueness", True, checked, details={"T": str(T), "pairs": details})


def check_stochastic_rg(model: ModelSpec, n_max: int, samples: int, seed: int) -> PropertyResult:
    """Composed and directly simulated kernels agree (Fisher tests, Bonferroni)."""
    a = State.of(0, 1, 1, 0, 1, 0, 1)
    pvals = []
    for N in range(1, n_max + 1):
        composed = stochastic_rg_apply(sampler_psi(model, N, Bernoulli()), model)
        direct = sampler_psi(model, N + 1, Bernoulli())
        rep = two_sample_kernel_test(composed, direct, a, samples, 4, seed=seed + N)
        pvals += [(N, k + 1, p) for k, p in enumerate(rep.pvalues)]
    cut = 0.01 / len(pvals)
    worst = min(pvals, key=lambda x: x[2])
    if worst[2] < cut:
        return PropertyResult(f"stochastic_rg[{model.name}]", False, len(pvals),
                              {"N": worst[0], "component": worst[1], "pvalue": worst[2]})
    return PropertyResult(f"stochastic_rg[{model.name}]", True, len(pvals), details={"min_pvalue": worst[2]})


DEFAULT_SIZES = {
    "rg_n_max": 6,
    "flow_n_max": 5,
    "fractional_n_max": 4,
    "fractional_problems": 5,
    "staircase_count": 40,
    "fixed_point_maps": 5,
    "fixed_point_k_max": 8,
    "nonuniqueness_n": [6, 8],
    "stochastic_n_max": 3,
    "stochastic_samples": 4000,
}


def run_verify(sizes: dict | None = None, seed: int = 0, fault: dict | None = None) -> list[PropertyResult]:
    """Run every suite; ``fault`` swaps in a corrupted coupling for the RG side only."""
    cfg = {**DEFAULT_SIZES, **(sizes or {})}
    rng = random.Random(seed)
    xi_a = None
    if fault:
        base = MODEL_A if fault.get("model", "A") == "A" else MODEL_B
        xi_a = ModelSpec.bit(fault.get("f", base.f_table), fault.get("g", base.g_table), name=f"{base.name}-corrupted")
    suites: list[Callable[[], PropertyResult]] = [
        lambda: check_rg_commutation(MODEL_A, Cutoff(), cfg["rg_n_max"], xi_a),
        lambda: check_rg_commutation(MODEL_A, ConstAt(1), cfg["rg_n_max"], xi_a),
        lambda: check_rg_commutation(MODEL_B, Cutoff(), cfg["rg_n_max"]),
        lambda: check_rg_commutation(MODEL_B, ConstAt(1), cfg["rg_n_max"]),
        lambda: check_flow_identity(MODEL_A, cfg["flow_n_max"]),
        lambda: check_flow_identity(MODEL_B, cfg["flow_n_max"]),
        lambda: check_fractional(MODEL_A, cfg["fractional_n_max"], cfg["fractional_problems"], rng),
        lambda: check_fractional(MODEL_B, cfg["fractional_n_max"], cfg["fractional_problems"], rng),
        lambda: check_staircase(cfg["staircase_count"], rng),
        lambda: check_fixed_point(cfg["fixed_point_maps"], range(4, cfg["fixed_point_k_max"] + 1), rng),
        lambda: check_nonuniqueness(cfg["nonuniqueness_n"]),
        lambda: check_stochastic_rg(MODEL_A, cfg["stochastic_n_max"], cfg["stochastic_samples"], seed),
        lambda: check_stochastic_rg(MODEL_B, cfg["stochastic_n_max"], cfg["stochastic_samples"], seed),
    ]
    out = []
    for suite in suites:
        t0 = time.perf_counter()
        r = suite()
        r.seconds = time.perf_counter() - t0
        out.append(r)
    return out
