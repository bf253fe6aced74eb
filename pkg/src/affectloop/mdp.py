"""Decision core: transition estimation, chain analysis, value iteration.

The model is a discrete MDP over the four learning emotions with five
teaching actions. Discounting is per successor state, so future value
accrued in the satisfied/curious states weighs most. Value iteration
extracts both the optimal and the second-best (fallback) action per
state; the default tensors ship in config/default_mdp.json.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from math import gcd

import numpy as np

from .errors import ConvergenceError

STATES = ("bored", "satisfied", "curious", "confused")
ACTIONS = ("increase_pace", "decrease_pace", "simplify_content", "no_change", "enrich_content")

ROW_SUM_TOL = 1e-9


@dataclass
class MdpModel:
    """States, actions, P[a][s][s'], R[a][s][s'], per-state discounts."""

    states: tuple
    actions: tuple
    p: np.ndarray          # shape (A, S, S), rows sum to 1
    r: np.ndarray          # shape (A, S, S)
    discounts: np.ndarray  # shape (S,), values in [0, 1)
    tie_break: tuple = None

    def __post_init__(self):
        self.states = tuple(self.states)
        self.actions = tuple(self.actions)
        if self.tie_break is None:
            self.tie_break = self.actions
        self.p = np.asarray(self.p, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.discounts = np.asarray(self.discounts, dtype=float)
        a, s = len(self.actions), len(self.states)
        if self.p.shape != (a, s, s) or self.r.shape != (a, s, s):
            raise ValueError(f"P and R must have shape ({a}, {s}, {s})")
        if self.discounts.shape != (s,):
            raise ValueError(f"discounts must have shape ({s},)")
        if np.any(self.p < 0) or np.any(np.abs(self.p.sum(axis=2) - 1.0) > ROW_SUM_TOL):
            raise ValueError("each P[a][s][.] must be a probability row summing to 1")
        if not np.all(np.isfinite(self.r)):
            raise ValueError("rewards must be finite")
        if np.any(self.discounts < 0) or np.any(self.discounts >= 1.0):
            raise ValueError("discounts must lie in [0, 1)")
        if sorted(self.tie_break) != sorted(self.actions):
            raise ValueError("tie_break must be a permutation of the actions")

    @classmethod
    def from_config(cls, cfg: dict) -> "MdpModel":
        states = tuple(cfg["states"])
        actions = tuple(cfg["actions"])
        s, a = len(states), len(actions)
        p = np.zeros((a, s, s))
        r = np.zeros((a, s, s))
        for ai, action in enumerate(actions):
            for si, state in enumerate(states):
                p_row = cfg["transitions"][action][state]
                r_row = cfg["rewards"][action][state]
                for sj, nxt in enumerate(states):
                    p[ai, si, sj] = p_row[nxt]
                    r[ai, si, sj] = r_row[nxt]
        discounts = np.array([cfg["discounts"][state] for state in states])
        return cls(states=states, actions=actions, p=p, r=r,
                   discounts=discounts, tie_break=tuple(cfg.get("tie_break", actions)))

    def to_config(self) -> dict:
        return {
            "states": list(self.states),
            "actions": list(self.actions),
            "tie_break": list(self.tie_break),
            "discounts": {s: float(g) for s, g in zip(self.states, self.discounts)},
            "transitions": {
                a: {s: {sp: float(self.p[ai, si, sj]) for sj, sp in enumerate(self.states)}
                    for si, s in enumerate(self.states)}
                for ai, a in enumerate(self.actions)
            },
            "rewards": {
                a: {s: {sp: float(self.r[ai, si, sj]) for sj, sp in enumerate(self.states)}
                    for si, s in enumerate(self.states)}
                for ai, a in enumerate(self.actions)
            },
        }


def load_mdp_config(path) -> MdpModel:
    with open(path, "r", encoding="utf-8") as fh:
        return MdpModel.from_config(json.load(fh))


def default_mdp_model() -> MdpModel:
    """The shipped default tensors (tuned to the published policy table)."""
    text = resources.files("affectloop").joinpath("config/default_mdp.json").read_text()
    return MdpModel.from_config(json.loads(text))


@dataclass
class Policy:
    """Optimal and fallback action per state, with the Q table behind them."""

    states: tuple
    actions: tuple
    optimal: dict
    suboptimal: dict
    q_values: dict          # (state, action) -> float
    value_function: dict    # state -> float
    iterations: int
    residual: float = 0.0
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "optimal": dict(self.optimal),
            "suboptimal": dict(self.suboptimal),
            "value_function": dict(self.value_function),
            "q_values": {s: {a: self.q_values[(s, a)] for a in self.actions}
                         for s in self.states},
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }


class TransitionLog:
    """Timestamped (state, action, next_state) observations."""

    def __init__(self, states=STATES, actions=ACTIONS):
        self.states = tuple(states)
        self.actions = tuple(actions)
        self.entries = []

    def append(self, state, action, next_state, ts_ms=0):
        if state not in self.states or next_state not in self.states:
            raise ValueError(f"unknown state in transition ({state!r}, {next_state!r})")
        if action not in self.actions:
            raise ValueError(f"unknown action {action!r}")
        self.entries.append((state, action, next_state, ts_ms))

    def __len__(self):
        return len(self.entries)


def estimate_transitions(log: TransitionLog, smoothing: float = 1.0) -> np.ndarray:
    """Laplace-smoothed empirical transition tensor from a log.

    P[a][s][s'] = (count(s,a,s') + smoothing) / (count(s,a,.) + smoothing*|S|).
    With smoothing > 0 every row is strictly positive, keeping the chain
    irreducible by construction; an empty log yields uniform rows.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    s_index = {s: i for i, s in enumerate(log.states)}
    a_index = {a: i for i, a in enumerate(log.actions)}
    n_s, n_a = len(log.states), len(log.actions)
    counts = np.zeros((n_a, n_s, n_s))
    for state, action, nxt, _ in log.entries:
        counts[a_index[action], s_index[state], s_index[nxt]] += 1.0
    totals = counts.sum(axis=2, keepdims=True)
    denom = totals + smoothing * n_s
    if smoothing == 0.0 and np.any(totals == 0):
        raise ValueError("smoothing 0 requires at least one observation per (state, action)")
    return (counts + smoothing) / denom


def stationary_distribution(chain, tol: float = 1e-10, max_iters: int = 10**5) -> np.ndarray:
    """Power-iterate pi <- pi P from the uniform vector until the L1 gap < tol.

    Periodic or reducible chains are rejected: even when the symmetric
    start happens to sit on a fixed point (a period-2 swap fixes the
    uniform vector), that vector is not a limiting distribution.
    """
    chain = np.asarray(chain, dtype=float)
    n = chain.shape[0]
    if chain.shape != (n, n) or np.any(chain < 0) or np.any(np.abs(chain.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise ValueError("chain must be a row-stochastic square matrix")
    report = check_ergodicity(chain)
    if not (report.irreducible and report.aperiodic):
        raise ConvergenceError(
            "chain is "
            + ("periodic" if report.irreducible else "reducible")
            + "; no unique limiting distribution"
        )
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        nxt = pi @ chain
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise ConvergenceError(
        f"power iteration did not converge within {max_iters} iterations",
        residual=float(np.abs(pi @ chain - pi).sum()),
    )


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in np.nonzero(adj[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return seen


def _strongly_connected(adj: np.ndarray) -> bool:
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def _period_of_state(adj: np.ndarray, start: int) -> int:
    """gcd of closed-walk lengths through `start` (0 when no walk returns).

    Uses the BFS-depth identity on the strongly connected component of
    `start`: the period is gcd over in-component edges (u, v) of
    depth(u) + 1 - depth(v).
    """
    scc = _reachable(adj, start) & _reachable(adj.T, start)
    members = np.nonzero(scc)[0]
    if members.size == 1 and not adj[start, start]:
        return 0
    depth = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.nonzero(adj[u])[0]:
                v = int(v)
                if scc[v] and v not in depth:
                    depth[v] = depth[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u in members:
        for v in np.nonzero(adj[u])[0]:
            if scc[v]:
                g = gcd(g, depth[int(u)] + 1 - depth[int(v)])
    return abs(g)


@dataclass
class ErgodicityReport:
    irreducible: bool
    aperiodic: bool
    spectral_gap: float


def check_ergodicity(chain) -> ErgodicityReport:
    """Structural and spectral health of a chain.

    Irreducibility via strong connectivity of the positive-entry digraph,
    aperiodicity via the gcd of cycle lengths through each state, spectral
    gap as 1 - |lambda_2|.
    """
    chain = np.asarray(chain, dtype=float)
    n = chain.shape[0]
    if chain.shape != (n, n) or np.any(chain < 0) or np.any(np.abs(chain.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise ValueError("chain must be a row-stochastic square matrix")
    adj = chain > 0
    irreducible = _strongly_connected(adj)
    periods = [_period_of_state(adj, s) for s in range(n)]
    aperiodic = all(p == 1 for p in periods)
    eigvals = np.sort(np.abs(np.linalg.eigvals(chain)))[::-1]
    lambda2 = float(eigvals[1]) if n > 1 else 0.0
    return ErgodicityReport(
        irreducible=irreducible,
        aperiodic=aperiodic,
        spectral_gap=float(1.0 - lambda2),
    )


def value_iteration(model: MdpModel, tol: float = 1e-6, max_iters: int = 1000,
                    seed: int = 0) -> Policy:
    """Fixed-point iteration of the per-successor-discount Bellman update.

    V_{i+1}(s) = max_a sum_{s'} P[a][s][s'] (R[a][s][s'] + gamma(s') V_i(s'))

    Values start from a seeded random vector. Hitting max_iters returns a
    Policy flagged converged=False with the residual attached.
    """
    rng = np.random.default_rng(seed)
    n_s = len(model.states)
    v = rng.uniform(0.0, 1.0, size=n_s)
    gamma = model.discounts
    converged = False
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        q = (model.p * (model.r + gamma[None, None, :] * v[None, None, :])).sum(axis=2)
        v_next = q.max(axis=0)
        if not np.all(np.isfinite(v_next)):
            raise ValueError("value iteration produced non-finite values")
        residual = float(np.abs(v_next - v).max())
        v = v_next
        if residual < tol:
            converged = True
            break

    q = (model.p * (model.r + gamma[None, None, :] * v[None, None, :])).sum(axis=2)
    # Q values within the residual-induced error band count as tied and
    # fall back to the configured action order
    gamma_cap = min(float(gamma.max()), 0.99)
    tie_tol = 10.0 * max(residual, tol) / (1.0 - gamma_cap)
    tb_rank = {a: model.tie_break.index(a) for a in model.actions}
    optimal, suboptimal, q_values = {}, {}, {}
    for si, state in enumerate(model.states):
        by_q = sorted(model.actions, key=lambda a: -q[model.actions.index(a), si])
        ranked = []
        cluster = []
        cluster_top = None
        for action in by_q:
            q_a = q[model.actions.index(action), si]
            if cluster and cluster_top - q_a > tie_tol:
                ranked.extend(sorted(cluster, key=tb_rank.get))
                cluster = []
            if not cluster:
                cluster_top = q_a
            cluster.append(action)
        ranked.extend(sorted(cluster, key=tb_rank.get))
        optimal[state] = ranked[0]
        suboptimal[state] = ranked[1] if len(ranked) > 1 else None
        for ai, action in enumerate(model.actions):
            q_values[(state, action)] = float(q[ai, si])
    return Policy(
        states=model.states,
        actions=model.actions,
        optimal=optimal,
        suboptimal=suboptimal,
        q_values=q_values,
        value_function={s: float(v[si]) for si, s in enumerate(model.states)},
        iterations=iterations,
        residual=residual,
        converged=converged,
    )


def policy_chain(model: MdpModel, policy_map: dict) -> np.ndarray:
    """The state chain induced by following one action per state."""
    rows = []
    for si, state in enumerate(model.states):
        ai = model.actions.index(policy_map[state])
        rows.append(model.p[ai, si])
    return np.asarray(rows)


def lookup_action(policy: Policy, state: str, infeasible=frozenset()) -> tuple:
    """Best feasible action for a state, with the tier that produced it.

    Tier is "optimal", "suboptimal", or "best_feasible" (highest remaining
    Q when both preferred actions are ruled out).
    """
    if state not in policy.states:
        raise ValueError(f"unknown state {state!r}")
    infeasible = set(infeasible)
    unknown = infeasible - set(policy.actions)
    if unknown:
        raise ValueError(f"unknown infeasible actions {sorted(unknown)}")
    if len(infeasible) >= len(policy.actions):
        raise ValueError("all actions are infeasible")
    if policy.optimal[state] not in infeasible:
        return policy.optimal[state], "optimal"
    if policy.suboptimal[state] is not None and policy.suboptimal[state] not in infeasible:
        return policy.suboptimal[state], "suboptimal"
    tb_rank = {a: i for i, a in enumerate(policy.actions)}
    feasible = [a for a in policy.actions if a not in infeasible]
    best = min(feasible, key=lambda a: (-policy.q_values[(state, a)], tb_rank[a]))
    return best, "best_feasible"
