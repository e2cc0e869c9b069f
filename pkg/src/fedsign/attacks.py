"""Byzantine adversary behaviors injected into the federation loop.

Three threat models: additive-trigger data poisoning (tm1), crafted model
updates (tm2), and coordinated colluders that combine both (tm3).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import ClientShard, Role, SupervisedSet
from .dp import standard_normal
from .errors import RoleMismatch
from .model import ParamVector

TM1 = "tm1"
TM2 = "tm2"
TM3 = "tm3"

SIGN_FLIP = "sign_flip"
RANDOM_GAUSS = "random_gauss"
SCALED = "scaled"

IDENTICAL_SIGNFLIP = "identical_signflip"
IDENTICAL_RANDOM = "identical_random"

# crafted-vector magnitude relative to the honest mean gradient; amplified
# so the coordinated attack visibly drags magnitude-sensitive aggregation
COLLUSION_BOOST = 2.0


@dataclass(frozen=True)
class AttackConfig:
    threat: str
    compromised_frac: float
    trigger_v: float = 3.0
    poison_frac: float = 0.5
    tm2_mode: str = SIGN_FLIP
    tm2_scale: float = 1.0
    collusion_strategy: str = IDENTICAL_SIGNFLIP
    seed: int = 0

    def __post_init__(self):
        if self.threat not in (TM1, TM2, TM3):
            raise ValueError(f"unknown threat {self.threat!r}")
        if not 0.0 <= self.compromised_frac < 1.0:
            raise ValueError("compromised_frac must lie in [0,1)")
        if not 0.0 < self.poison_frac <= 1.0:
            raise ValueError("poison_frac must lie in (0,1]")
        if self.tm2_mode not in (SIGN_FLIP, RANDOM_GAUSS, SCALED):
            raise ValueError(f"unknown tm2_mode {self.tm2_mode!r}")
        if self.collusion_strategy not in (IDENTICAL_SIGNFLIP, IDENTICAL_RANDOM):
            raise ValueError(f"unknown collusion_strategy {self.collusion_strategy!r}")

    def n_compromised(self, n_clients: int) -> int:
        t = round(self.compromised_frac * n_clients)
        if t >= n_clients:
            raise ValueError("compromised count must be below the client count")
        return t

    def compromised_role(self) -> Role:
        return {TM1: Role.POISONED, TM2: Role.MODEL_ATTACKER, TM3: Role.COLLUDER}[self.threat]


def assign_roles(n_clients: int, cfg: AttackConfig) -> list[Role]:
    """First t ids of a seeded permutation become the compromised set."""
    t = cfg.n_compromised(n_clients)
    roles = [Role.HONEST] * n_clients
    if t == 0:
        return roles
    perm = np.random.default_rng(cfg.seed).permutation(n_clients)
    for cid in perm[:t]:
        roles[int(cid)] = cfg.compromised_role()
    return roles


def poison_data(shard: ClientShard, cfg: AttackConfig, rng: np.random.Generator) -> ClientShard:
    """Add trigger_v to every input coordinate of a seeded random subset of
    train samples; targets and test data are untouched."""
    if shard.role not in (Role.POISONED, Role.COLLUDER):
        raise RoleMismatch(f"cannot poison data of a {shard.role.value} shard")
    n = len(shard.train)
    k = int(np.ceil(cfg.poison_frac * n))
    idx = rng.permutation(n)[:k]
    inputs = shard.train.inputs.copy()
    inputs[idx] += cfg.trigger_v
    train = SupervisedSet(inputs, shard.train.targets.copy(), shard.train.scaler)
    return replace(shard, train=train)


def poison_update(honest: ParamVector, cfg: AttackConfig, rng: np.random.Generator) -> ParamVector:
    """Replace an honest gradient with the tm2 adversarial payload."""
    if cfg.threat != TM2:
        raise RoleMismatch(f"poison_update requires threat tm2, got {cfg.threat}")
    if cfg.tm2_mode == SIGN_FLIP:
        return honest.with_values(-honest.values)
    if cfg.tm2_mode == SCALED:
        return honest.with_values(cfg.tm2_scale * honest.values)
    return honest.with_values(standard_normal(rng, honest.dim))


def collude(
    updates: list[tuple[int, ParamVector]],
    honest_mean: ParamVector,
    cfg: AttackConfig,
    rng: np.random.Generator,
) -> list[tuple[int, ParamVector]]:
    """All colluders transmit one shared crafted vector to maximize
    per-coordinate voting power."""
    if cfg.threat != TM3:
        raise RoleMismatch(f"collude requires threat tm3, got {cfg.threat}")
    if not updates:
        return []
    if cfg.collusion_strategy == IDENTICAL_SIGNFLIP:
        # Flip the honest consensus direction, scaled back into gradient space.
        magnitude = COLLUSION_BOOST * float(np.mean(np.abs(honest_mean.values)))
        crafted = -np.where(honest_mean.values >= 0, 1.0, -1.0) * max(magnitude, 1e-12)
    else:
        crafted = standard_normal(rng, honest_mean.dim)
    shared = honest_mean.with_values(crafted)
    return [(cid, shared) for cid, _ in updates]
