"""Shipped synthetic-target profiles and the --synth descriptor grammar.

A profile is rule-based so one file covers any qubit count: marginals are
cycled from a base pattern and planted pairs follow the pair rule
(adjacent_disjoint plants (2i, 2i+1) with cycled strengths).
"""

from __future__ import annotations

import importlib.resources
import json
from pathlib import Path

import numpy as np

from ..datasets import (
    BitDataset,
    TargetStats,
    synth_pairwise,
    synth_pairwise_table,
    synth_product,
)
from ..errors import ConfigError


def load_profile(name_or_path: str) -> dict:
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return json.loads(path.read_text())
    res = importlib.resources.files(__package__).joinpath(f"{name_or_path}.json")
    if not res.is_file():
        raise ConfigError(f"unknown profile {name_or_path!r}")
    return json.loads(res.read_text())


def profile_marginals(profile: dict, n: int) -> np.ndarray:
    pattern = profile["marginal_pattern"]
    return np.array([pattern[q % len(pattern)] for q in range(n)])


def profile_pairs(profile: dict, n: int) -> list[tuple[int, int, float]]:
    if profile.get("pair_rule", "adjacent_disjoint") != "adjacent_disjoint":
        raise ConfigError(f"unknown pair rule {profile.get('pair_rule')!r}")
    strengths = profile.get("pair_strength_pattern", [])
    pairs = [
        (2 * i, 2 * i + 1, strengths[i % len(strengths)]) for i in range(n // 2)
    ] if strengths else []
    # optional sparse near-duplicate pairs appearing deeper in the register,
    # emulating the tight pairs of real data that reset the covariance scale
    start = profile.get("strong_pair_start")
    if start is not None:
        every = profile.get("strong_pair_every", 32)
        c = profile["strong_pair_strength"]
        marg = profile_marginals(profile, n)
        used = {q for j, k, _ in pairs for q in (j, k)}
        for q in range(start, n - 1, every):
            if q in used or (q + 1) in used:
                raise ConfigError("strong pairs collide with the regular pair rule")
            # reinforce the marginal product so the joint stays a distribution
            sgn = -1.0 if marg[q] * marg[q + 1] < 0 else 1.0
            pairs.append((q, q + 1, sgn * c))
    return pairs


def profile_dataset(profile: dict, n: int, rows: int | None = None,
                    seed: int | None = None) -> BitDataset:
    rows = profile.get("rows", 20000) if rows is None else rows
    seed = profile.get("seed", 0) if seed is None else seed
    return synth_pairwise(n, profile_marginals(profile, n), profile_pairs(profile, n),
                          rows, seed, flip_prob=profile.get("flip_prob", 0.0),
                          flip_block_size=profile.get("flip_block_size"))


def profile_exact_stats(profile: dict, n: int) -> TargetStats:
    table = synth_pairwise_table(n, profile_marginals(profile, n), profile_pairs(profile, n),
                                 flip_prob=profile.get("flip_prob", 0.0),
                                 flip_block_size=profile.get("flip_block_size"))
    return TargetStats.exact(table)


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(";") if x != ""]


def parse_synth(descriptor: str, n: int, rows: int | None, seed: int | None):
    """Realize a --synth descriptor into (TargetStats, provenance dict).

    Grammar:
      product:t=<v>            uniform marginal v on every qubit
      product:t=<v1;v2;...>    explicit marginals (cycled to n)
      pairwise:t=<...>,pairs=<j-k:c;...>
      profile:<name-or-path>[:exact]
    """
    rows = 20000 if rows is None else rows
    seed = 0 if seed is None else seed
    kind, _, rest = descriptor.partition(":")
    if kind == "profile":
        name, _, mode = rest.partition(":")
        profile = load_profile(name)
        if mode == "exact":
            stats = profile_exact_stats(profile, n)
        else:
            stats = TargetStats.empirical(profile_dataset(profile, n, rows, seed))
        prov = {"synth": descriptor, "n": n, "rows": rows, "seed": seed}
        return stats, prov
    fields = {}
    for part in rest.split(","):
        key, _, val = part.partition("=")
        fields[key] = val
    if "t" not in fields:
        raise ConfigError(f"descriptor {descriptor!r} needs t=...")
    base = _parse_floats(fields["t"])
    marginals = np.array([base[q % len(base)] for q in range(n)])
    if kind == "product":
        ds = synth_product(n, marginals, rows, seed)
        return TargetStats.empirical(ds), {"synth": descriptor, "n": n, "rows": rows, "seed": seed}
    if kind == "pairwise":
        planted = []
        for spec in fields.get("pairs", "").split(";"):
            if not spec:
                continue
            jk, _, c = spec.partition(":")
            j, _, k = jk.partition("-")
            planted.append((int(j), int(k), float(c)))
        ds = synth_pairwise(n, marginals, planted, rows, seed)
        return TargetStats.empirical(ds), {"synth": descriptor, "n": n, "rows": rows, "seed": seed}
    raise ConfigError(f"unknown synth kind {kind!r}")
