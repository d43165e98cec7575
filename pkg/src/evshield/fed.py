"""Simulated federated averaging and the pooled centralized baseline."""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .nncore import Forecaster, ModelParameters, fit
from .seeding import derive_rng

logger = logging.getLogger(__name__)

AVERAGING_MODES = ("uniform", "sample-weighted")


class FederationError(ValueError):
    pass


@dataclass(frozen=True)
class FederationConfig:
    rounds: int = 5
    epochs_per_round: int = 10
    batch_size: int = 32
    learning_rate: float = 0.001
    averaging: str = "uniform"
    lstm_units: int = 50
    dense_units: int = 10
    max_workers: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("rounds", "epochs_per_round", "batch_size", "lstm_units", "dense_units", "max_workers"):
            if getattr(self, name) < 1:
                raise FederationError(f"{name} must be at least 1")
        if self.averaging not in AVERAGING_MODES:
            raise FederationError(f"averaging must be one of {AVERAGING_MODES}")

    @property
    def total_epochs(self):
        return self.rounds * self.epochs_per_round

    def model(self):
        return Forecaster(self.lstm_units, self.dense_units)


@dataclass
class ClientState:
    """A participant. Its windows never leave it: the orchestrator only calls
    :meth:`train` and receives parameters and losses back."""

    client_id: str
    train: object  # WindowedDataset
    params: ModelParameters | None = None

    @property
    def sample_count(self):
        return len(self.train)


def local_train(model, dataset, global_params, epochs, batch_size, learning_rate, rng):
    """Start from ``global_params`` with a fresh Adam state. Returns (params, per-epoch losses)."""
    if len(dataset) == 0:
        logger.warning("empty local dataset; returning global parameters untouched")
        return global_params, []
    if epochs == 0:
        return global_params, []
    return fit(model, global_params, dataset.model_inputs(), dataset.model_targets(),
               epochs, batch_size, learning_rate, rng)


def federated_average(client_params, mode="uniform", sample_counts=None, client_ids=None):
    """Element-wise (weighted) mean, folded in the given client order."""
    client_params = list(client_params)
    if not client_params:
        raise FederationError("no client parameters to average")
    ids = list(client_ids) if client_ids is not None else [str(i) for i in range(len(client_params))]
    ref = client_params[0]
    for cid, p in zip(ids, client_params):
        if not p.same_layout(ref):
            raise FederationError(f"client {cid}: parameter shapes {p.shapes} differ from {ref.shapes}")
    if mode == "uniform":
        acc = ref.copy()
        for p in client_params[1:]:
            acc = acc.map(np.add, p)
        k = float(len(client_params))
        return acc.map(lambda a: a / k)
    if mode == "sample-weighted":
        if sample_counts is None or len(sample_counts) != len(client_params):
            raise FederationError("sample-weighted averaging needs one sample count per client")
        total = float(sum(sample_counts))
        if total <= 0:
            raise FederationError("sample counts sum to zero")
        weights = [n / total for n in sample_counts]
        acc = ref.map(lambda a: weights[0] * a)
        for w, p in zip(weights[1:], client_params[1:]):
            acc = acc.map(lambda a, b, w=w: a + w * b, p)
        return acc
    raise FederationError(f"unknown averaging mode {mode!r}")


@dataclass
class FederationResult:
    params: ModelParameters
    history: list = field(default_factory=list)  # dicts: round, client, losses
    seconds: float = 0.0

    def history_records(self):
        """Flat (round, client, epoch, loss) records."""
        return [
            {"round": h["round"], "client": h["client"], "epoch": e, "loss": loss}
            for h in self.history
            for e, loss in enumerate(h["losses"])
        ]


def initial_params(config):
    return config.model().init_params(derive_rng(config.seed, "init"))


def client_rng(config, round_index, client_id):
    return derive_rng(config.seed, "fed", round_index, client_id)


def run_federation(clients, config=FederationConfig(), init_params=None):
    """``rounds`` x (local training on every client, average, broadcast)."""
    clients = sorted(clients, key=lambda c: c.client_id)
    if len({c.client_id for c in clients}) != len(clients):
        raise FederationError("duplicate client ids")
    active = [c for c in clients if c.sample_count > 0]
    for c in clients:
        if c.sample_count == 0:
            logger.warning("client %s has no training windows; skipped", c.client_id)
    if not active:
        raise FederationError("every client dataset is empty")
    model = config.model()
    global_params = initial_params(config) if init_params is None else init_params
    history = []
    started = time.perf_counter()

    def work(client, r, params):
        return local_train(model, client.train, params, config.epochs_per_round,
                           config.batch_size, config.learning_rate, client_rng(config, r, client.client_id))

    for r in range(config.rounds):
        if config.max_workers > 1:
            with ThreadPoolExecutor(config.max_workers) as pool:
                outcomes = list(pool.map(lambda c: work(c, r, global_params), active))
        else:
            outcomes = [work(c, r, global_params) for c in active]
        for c, (params, losses) in zip(active, outcomes):
            c.params = params
            history.append({"round": r, "client": c.client_id, "losses": [float(x) for x in losses]})
        global_params = federated_average(
            [p for p, _ in outcomes],
            config.averaging,
            [c.sample_count for c in active],
            [c.client_id for c in active],
        )
    return FederationResult(global_params, history, time.perf_counter() - started)


def centralized_train(datasets, config=FederationConfig(), init_params=None):
    """One model on the pooled windows for rounds x epochs_per_round epochs.

    Starts from the same initial parameters as :func:`run_federation`.
    """
    from .data import WindowedDataset

    datasets = [d for d in datasets if len(d) > 0]
    if not datasets:
        raise FederationError("pooled dataset is empty")
    pooled = WindowedDataset.concatenate(datasets)
    model = config.model()
    params = initial_params(config) if init_params is None else init_params
    started = time.perf_counter()
    params, losses = local_train(model, pooled, params, config.total_epochs, config.batch_size,
                                 config.learning_rate, derive_rng(config.seed, "central"))
    return FederationResult(
        params, [{"round": 0, "client": "pooled", "losses": [float(x) for x in losses]}],
        time.perf_counter() - started,
    )
