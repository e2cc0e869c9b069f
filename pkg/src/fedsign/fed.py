"""Federation round engine: local training, the aggregation protocols, and
the multi-round simulation loop.

Three protocols are simulated in-process: ``fedsgd`` (mean of raw
gradients), ``fedavg`` (sample-weighted mean of local weight deltas) and
``signsgd_secure`` (per-coordinate sign, Gaussian perturbation, fixed-point
Paillier encryption, homomorphic sum, sign-of-sum broadcast). A
``signsgd_plain`` variant runs the identical sign pipeline without
encryption, for transparency checks and fast experimentation.

Everything is deterministic given the four seeds; per-client randomness
comes from spawn-keyed substreams so results are independent of client
scheduling order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import attacks as atk
from .analysis import metrics
from .data import ClientShard, Role
from .dp import PrivacyBudget, gaussian_sigma, perturb
from .errors import DimensionMismatch, EmptyUpdateSet
from .he import (
    Ciphertext,
    FixedPointCodec,
    PaillierKeypair,
    PaillierPublicKey,
    add_cipher,
    decrypt,
    encrypt,
    keygen,
)
from .model import (
    Batch,
    ModelArch,
    ParamVector,
    apply_update,
    arch_layout,
    forward,
    init_params,
    loss_and_grad,
)

FEDSGD = "fedsgd"
FEDAVG = "fedavg"
SIGNSGD_SECURE = "signsgd_secure"
SIGNSGD_PLAIN = "signsgd_plain"

PROTOCOLS = (FEDSGD, FEDAVG, SIGNSGD_SECURE, SIGNSGD_PLAIN)

# spawn-key tags keeping RNG substreams disjoint
_KEYGEN_TAG = 1 << 20
_POISON_TAG = 1 << 21
_COLLUDE_TAG = 1 << 22


@dataclass(frozen=True)
class Seeds:
    data: int = 0
    init: int = 1
    noise: int = 2
    attack: int = 3

    def shifted(self, offset: int) -> "Seeds":
        return Seeds(self.data + offset, self.init + offset,
                     self.noise + offset, self.attack + offset)


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str
    n_clients: int
    rounds: int
    lr: float
    local_epochs: int = 1
    batch_size: int | None = None  # None = full local shard per round
    dp: PrivacyBudget | None = None
    he_bits: int = 512
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.n_clients < 1 or self.rounds < 0:
            raise ValueError("n_clients >= 1 and rounds >= 0 required")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")


@dataclass(frozen=True)
class ClientUpdate:
    client_id: int
    payload: object  # ParamVector, list[Ciphertext], or quantized sign array
    bytes_on_wire: int


@dataclass(frozen=True)
class RoundRecord:
    round: int
    global_train_loss: float
    test_mse: float
    test_rmse: float
    test_mape: float
    per_client_mape: tuple
    wall_time_ms: float
    bytes_up: int
    attack_active: bool


@dataclass(frozen=True)
class KeyAuthority:
    """Holds the Paillier secret key; by protocol it only ever decrypts the
    homomorphic aggregate, never individual client ciphertexts."""

    keypair: PaillierKeypair

    @property
    def public(self) -> PaillierPublicKey:
        return self.keypair.public

    def decrypt_aggregate(self, c: Ciphertext) -> int:
        return decrypt(self.keypair.secret, c)


@dataclass(frozen=True)
class SimulationResult:
    records: list[RoundRecord]
    final_params: ParamVector
    roles: list[Role]


def _sign(values: np.ndarray) -> np.ndarray:
    # deterministic tie-break: sign(0) = +1
    return np.where(values >= 0.0, 1.0, -1.0)


def _client_rng(seeds: Seeds, round_idx: int, client_id: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seeds.noise, spawn_key=(round_idx, client_id))
    )


def _select_batch(shard: ClientShard, batch_size: int | None, rng) -> Batch:
    n = len(shard.train)
    if batch_size is None or batch_size >= n:
        return Batch(shard.train.inputs, shard.train.targets)
    idx = rng.permutation(n)[:batch_size]
    return Batch(shard.train.inputs[idx], shard.train.targets[idx])


def compute_local_vector(
    shard: ClientShard,
    global_params: ParamVector,
    arch: ModelArch,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
) -> ParamVector:
    """The honest local computation: a gradient (fedsgd/signsgd) or the
    accumulated weight delta after local_epochs of SGD (fedavg)."""
    if cfg.protocol == FEDAVG:
        params = global_params
        for _ in range(cfg.local_epochs):
            batch = _select_batch(shard, cfg.batch_size, rng)
            _, grad = loss_and_grad(params, arch, batch)
            params = apply_update(params, grad, cfg.lr)
        return global_params.with_values(global_params.values - params.values)
    batch = _select_batch(shard, cfg.batch_size, rng)
    _, grad = loss_and_grad(global_params, arch, batch)
    return grad


def package_update(
    client_id: int,
    vec: ParamVector,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
    pk: PaillierPublicKey | None = None,
    codec: FixedPointCodec | None = None,
) -> ClientUpdate:
    """Wrap a local vector the way the wire protocol transmits it."""
    d = vec.dim
    if cfg.protocol in (FEDSGD, FEDAVG):
        return ClientUpdate(client_id, vec, bytes_on_wire=8 * d)
    sigma = gaussian_sigma(cfg.dp) if cfg.dp is not None else 0.0
    perturbed = perturb(_sign(vec.values), sigma, rng)
    if cfg.protocol == SIGNSGD_PLAIN:
        # quantize exactly as the codec would, so plain == secure bit-for-bit
        scale = FixedPointCodec(modulus=1 << 62).scale if codec is None else codec.scale
        quantized = np.round(perturbed * scale) / scale
        return ClientUpdate(client_id, quantized, bytes_on_wire=(d + 7) // 8)
    cipher = [encrypt(pk, codec.encode(x), rng) for x in perturbed]
    cipher_bytes = (pk.nsquare.bit_length() + 7) // 8
    return ClientUpdate(client_id, cipher, bytes_on_wire=d * cipher_bytes)


def local_round(
    shard: ClientShard,
    global_params: ParamVector,
    arch: ModelArch,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
    pk: PaillierPublicKey | None = None,
    codec: FixedPointCodec | None = None,
) -> ClientUpdate:
    """One client's full per-round contribution (honest path)."""
    vec = compute_local_vector(shard, global_params, arch, cfg, rng)
    return package_update(shard.client_id, vec, cfg, rng, pk=pk, codec=codec)


# --- aggregation rules ---

def _check_raw(updates: list[ClientUpdate]) -> list[ParamVector]:
    if not updates:
        raise EmptyUpdateSet("no client updates")
    vecs = [u.payload for u in updates]
    layouts = {v.layout for v in vecs}
    if len(layouts) != 1:
        raise DimensionMismatch("client updates disagree on layout")
    return vecs


def aggregate_fedsgd(updates: list[ClientUpdate]) -> ParamVector:
    vecs = _check_raw(updates)
    mean = np.mean([v.values for v in vecs], axis=0)
    return vecs[0].with_values(mean)


def aggregate_fedavg(updates: list[ClientUpdate], weights: list[float]) -> ParamVector:
    vecs = _check_raw(updates)
    if len(weights) != len(vecs):
        raise DimensionMismatch("weights not aligned with updates")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    agg = np.tensordot(w, np.stack([v.values for v in vecs]), axes=1) / w.sum()
    return vecs[0].with_values(agg)


def aggregate_signsgd(
    updates: list[ClientUpdate],
    authority: KeyAuthority,
    codec: FixedPointCodec,
) -> np.ndarray:
    """Homomorphically sum the encrypted perturbed signs, decrypt only the
    aggregate, and take the coordinate-wise sign of the decoded sum (the
    majority vote / median for noiseless +/-1 inputs and odd counts)."""
    if not updates:
        raise EmptyUpdateSet("no client updates")
    dims = {len(u.payload) for u in updates}
    if len(dims) != 1:
        raise DimensionMismatch("ciphertext vectors differ in dimension")
    d = dims.pop()
    pk = authority.public
    out = np.empty(d)
    for i in range(d):
        acc = updates[0].payload[i]
        for u in updates[1:]:
            acc = add_cipher(pk, acc, u.payload[i])
        out[i] = codec.decode(authority.decrypt_aggregate(acc))
    return _sign(out)


def aggregate_signsgd_plain(updates: list[ClientUpdate]) -> np.ndarray:
    if not updates:
        raise EmptyUpdateSet("no client updates")
    dims = {len(u.payload) for u in updates}
    if len(dims) != 1:
        raise DimensionMismatch("sign vectors differ in dimension")
    return _sign(np.sum([u.payload for u in updates], axis=0))


# --- the simulation loop ---

def _apply_attack_roles(
    shards: list[ClientShard], attack: atk.AttackConfig | None
) -> list[ClientShard]:
    if attack is None or attack.n_compromised(len(shards)) == 0:
        return list(shards)
    roles = atk.assign_roles(len(shards), attack)
    out = []
    for shard, role in zip(shards, roles):
        shard = shard.with_role(role)
        if role in (Role.POISONED, Role.COLLUDER):
            rng = np.random.default_rng(
                np.random.SeedSequence(attack.seed, spawn_key=(_POISON_TAG, shard.client_id))
            )
            shard = atk.poison_data(shard, attack, rng)
        out.append(shard)
    return out


def run_simulation(
    shards: list[ClientShard],
    arch: ModelArch,
    cfg: ProtocolConfig,
    attack: atk.AttackConfig | None = None,
) -> SimulationResult:
    if len(shards) != cfg.n_clients:
        raise ValueError(f"{len(shards)} shards for n_clients={cfg.n_clients}")
    shards = _apply_attack_roles(shards, attack)
    roles = [s.role for s in shards]
    attack_active = any(r is not Role.HONEST for r in roles)

    params = init_params(arch, cfg.seeds.init)
    layout = arch_layout(arch)

    authority = codec = None
    if cfg.protocol == SIGNSGD_SECURE:
        key_rng = np.random.default_rng(
            np.random.SeedSequence(cfg.seeds.noise, spawn_key=(_KEYGEN_TAG,))
        )
        authority = KeyAuthority(keygen(cfg.he_bits, key_rng))
        codec = FixedPointCodec(modulus=authority.public.n)

    scaler = shards[0].train.scaler
    test_inputs = np.concatenate([s.test.inputs for s in shards])
    test_targets = np.concatenate([s.test.targets for s in shards])
    train_inputs = np.concatenate([s.train.inputs for s in shards])
    train_targets = np.concatenate([s.train.targets for s in shards])
    weights = [float(len(s.train)) for s in shards]

    records: list[RoundRecord] = []
    for t in range(cfg.rounds):
        t0 = time.perf_counter()
        rngs = [_client_rng(cfg.seeds, t, s.client_id) for s in shards]
        vecs = [
            compute_local_vector(shard, params, arch, cfg, rng)
            for shard, rng in zip(shards, rngs)
        ]

        if attack_active and attack.threat == atk.TM2:
            for i, shard in enumerate(shards):
                if shard.role is Role.MODEL_ATTACKER:
                    vecs[i] = atk.poison_update(vecs[i], attack, rngs[i])
        elif attack_active and attack.threat == atk.TM3:
            honest = [v for v, s in zip(vecs, shards) if s.role is Role.HONEST]
            honest_mean = vecs[0].with_values(np.mean([v.values for v in honest], axis=0))
            colluders = [
                (s.client_id, vecs[i]) for i, s in enumerate(shards) if s.role is Role.COLLUDER
            ]
            shared_rng = np.random.default_rng(
                np.random.SeedSequence(attack.seed, spawn_key=(_COLLUDE_TAG, t))
            )
            crafted = dict(atk.collude(colluders, honest_mean, attack, shared_rng))
            for i, shard in enumerate(shards):
                if shard.client_id in crafted:
                    vecs[i] = crafted[shard.client_id]

        pk = authority.public if authority is not None else None
        updates = [
            package_update(shard.client_id, vec, cfg, rng, pk=pk, codec=codec)
            for shard, vec, rng in zip(shards, vecs, rngs)
        ]

        if cfg.protocol == FEDSGD:
            params = apply_update(params, aggregate_fedsgd(updates), cfg.lr)
        elif cfg.protocol == FEDAVG:
            params = apply_update(params, aggregate_fedavg(updates, weights), 1.0)
        elif cfg.protocol == SIGNSGD_SECURE:
            signs = aggregate_signsgd(updates, authority, codec)
            params = apply_update(params, ParamVector(signs, layout), cfg.lr)
        else:
            signs = aggregate_signsgd_plain(updates)
            params = apply_update(params, ParamVector(signs, layout), cfg.lr)

        train_err = forward(params, arch, train_inputs) - train_targets
        train_loss = float(np.mean(train_err * train_err))
        report = metrics(forward(params, arch, test_inputs), test_targets, scaler)
        per_client = tuple(
            metrics(forward(params, arch, s.test.inputs), s.test.targets, scaler).mape_pct
            for s in shards
        )
        records.append(
            RoundRecord(
                round=t,
                global_train_loss=train_loss,
                test_mse=report.mse,
                test_rmse=report.rmse,
                test_mape=report.mape_pct,
                per_client_mape=per_client,
                wall_time_ms=(time.perf_counter() - t0) * 1000.0,
                bytes_up=sum(u.bytes_on_wire for u in updates),
                attack_active=attack_active,
            )
        )
    return SimulationResult(records=records, final_params=params, roles=roles)


def convergence_round(losses: list[float], tol: float, patience: int) -> int | None:
    """First round after which the loss stops improving on its running
    minimum by more than tol for a full patience window."""
    if patience < 1:
        raise ValueError("patience must be >= 1")
    n = len(losses)
    for r in range(0, n - patience + 1):
        converged = True
        for j in range(r, r + patience):
            prefix_min = min(losses[:j]) if j > 0 else losses[0]
            if losses[j] < prefix_min - tol:
                converged = False
                break
        if converged:
            return r
    return None


def logical_payload_bits(protocol: str, dim: int) -> int:
    """Per-client per-round logical payload: 1 bit per coordinate for the
    sign protocols, 64 bits per raw float coordinate otherwise."""
    if protocol in (SIGNSGD_SECURE, SIGNSGD_PLAIN):
        return dim
    return 64 * dim
